export type Axis = 'axial' | 'coronal' | 'sagittal';
export type ClickLabel = 'positive' | 'negative';

export interface RlePayload {
  shape: number[];
  counts: number[];
}

export interface ClickInfo {
  coord: [number, number, number];
  label: ClickLabel;
  source: string;
}

export interface SessionSummary {
  session_id: string;
  case_id: string;
  volume_shape: [number, number, number];
  spacing: [number, number, number];
  n_clicks: number;
  clicks: ClickInfo[];
  mask_rle: RlePayload;
  report: Record<string, string>;
  probs: Record<string, number[]>;
  iou_pred: number | null;
  has_ground_truth: boolean;
  can_undo: boolean;
  dsc: number | null;
  undone?: boolean;
  message?: string;
}

export interface SlicePayload {
  axis: Axis;
  index: number;
  height: number;
  width: number;
  intensity_b64: string;
  window: [number, number];
  mask_rle: RlePayload;
  clicks: (ClickInfo & { click_index: number })[];
}

export interface CaseInfo {
  id: string;
  lesion_type: string;
  volume_shape: [number, number, number];
  spacing: [number, number, number];
  has_ground_truth: boolean;
}
