import type { Axis, ClickLabel, SessionSummary } from './types';
import { sliceCount } from './transform';
import { DEFAULT_OVERLAY_OPACITY, DEFAULT_WINDOW, type WindowLevel } from './overlay';

/** Client-side mirror of one interactive session plus view settings.
 * The click list is always replaced wholesale from server responses, so it
 * stays a prefix-consistent mirror of the server state. */
export interface ViewerState {
  summary: SessionSummary | null;
  axis: Axis;
  sliceIndex: number;
  view: { zoom: number; panX: number; panY: number };
  windowLevel: WindowLevel;
  clickMode: ClickLabel;
  overlayOpacity: number;
  dscTrace: (number | null)[];
  busy: boolean;
  error: string | null;
}

export function initialState(): ViewerState {
  return {
    summary: null,
    axis: 'axial',
    sliceIndex: 0,
    view: { zoom: 4, panX: 0, panY: 0 },
    windowLevel: { ...DEFAULT_WINDOW },
    clickMode: 'positive',
    overlayOpacity: DEFAULT_OVERLAY_OPACITY,
    dscTrace: [],
    busy: false,
    error: null,
  };
}

export function clampSliceIndex(state: ViewerState, index: number): number {
  if (!state.summary) return 0;
  const count = sliceCount(state.axis, state.summary.volume_shape);
  return Math.max(0, Math.min(count - 1, index));
}

export function withSession(state: ViewerState, summary: SessionSummary): ViewerState {
  const mid = Math.floor(sliceCount(state.axis, summary.volume_shape) / 2);
  return {
    ...state,
    summary,
    sliceIndex: mid,
    dscTrace: [],
    error: null,
  };
}

/** Apply a click/undo/get response: clicks and report mirror the server. */
export function withSummary(state: ViewerState, summary: SessionSummary): ViewerState {
  let trace = state.dscTrace;
  if (summary.n_clicks === state.dscTrace.length + 1) {
    trace = [...state.dscTrace, summary.dsc];
  } else if (summary.n_clicks < state.dscTrace.length) {
    trace = state.dscTrace.slice(0, summary.n_clicks);
  } else if (summary.n_clicks !== state.dscTrace.length) {
    trace = summary.clicks.map(() => null);
    if (summary.n_clicks > 0) trace[summary.n_clicks - 1] = summary.dsc;
  }
  return { ...state, summary, dscTrace: trace, error: null };
}

export function setAxis(state: ViewerState, axis: Axis): ViewerState {
  const next = { ...state, axis };
  return { ...next, sliceIndex: clampSliceIndex(next, state.sliceIndex) };
}

export function setSliceIndex(state: ViewerState, index: number): ViewerState {
  return { ...state, sliceIndex: clampSliceIndex(state, index) };
}

export function canUndo(state: ViewerState): boolean {
  return !!state.summary && state.summary.can_undo && !state.busy;
}
