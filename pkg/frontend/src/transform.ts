import type { Axis } from './types';

/**
 * Slice/canvas geometry.
 *
 * A slice along an axis is the 2D array numpy's take() produces: the sliced
 * axis is dropped and the remaining axes keep volume order (z, y, x):
 *   axial    (z fixed): rows = y, cols = x
 *   coronal  (y fixed): rows = z, cols = x
 *   sagittal (x fixed): rows = z, cols = y
 *
 * Canvas pixels map to slice texels through zoom and pan:
 *   canvas = texel * zoom + pan        (texel centre at (+0.5) * zoom + pan)
 *   texel  = floor((canvas - pan) / zoom)
 */

export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export interface SliceDims {
  height: number; // rows
  width: number; // cols
}

export function sliceDims(axis: Axis, volumeShape: [number, number, number]): SliceDims {
  const [d, h, w] = volumeShape;
  switch (axis) {
    case 'axial':
      return { height: h, width: w };
    case 'coronal':
      return { height: d, width: w };
    case 'sagittal':
      return { height: d, width: h };
  }
}

export function sliceCount(axis: Axis, volumeShape: [number, number, number]): number {
  const [d, h, w] = volumeShape;
  return axis === 'axial' ? d : axis === 'coronal' ? h : w;
}

/** (row, col) on a slice plus its index -> full voxel coordinate (z, y, x). */
export function sliceToVoxel(
  axis: Axis,
  index: number,
  row: number,
  col: number,
): [number, number, number] {
  switch (axis) {
    case 'axial':
      return [index, row, col];
    case 'coronal':
      return [row, index, col];
    case 'sagittal':
      return [row, col, index];
  }
}

/** Voxel (z, y, x) -> (row, col) on the slice of `axis` through it, or null
 * when the voxel does not lie on the displayed slice index. */
export function voxelToSlice(
  axis: Axis,
  index: number,
  voxel: [number, number, number],
): { row: number; col: number } | null {
  const [z, y, x] = voxel;
  if (axis === 'axial') return z === index ? { row: y, col: x } : null;
  if (axis === 'coronal') return y === index ? { row: z, col: x } : null;
  return x === index ? { row: z, col: y } : null;
}

/** Canvas position -> texel (row, col); null outside the slice extent. */
export function canvasToTexel(
  px: number,
  py: number,
  view: ViewTransform,
  dims: SliceDims,
): { row: number; col: number } | null {
  const col = Math.floor((px - view.panX) / view.zoom);
  const row = Math.floor((py - view.panY) / view.zoom);
  if (row < 0 || row >= dims.height || col < 0 || col >= dims.width) return null;
  return { row, col };
}

/** Texel centre -> canvas position (for drawing markers). */
export function texelToCanvas(
  row: number,
  col: number,
  view: ViewTransform,
): { x: number; y: number } {
  return {
    x: (col + 0.5) * view.zoom + view.panX,
    y: (row + 0.5) * view.zoom + view.panY,
  };
}

/** Full inverse transform: canvas click -> voxel, on the current slice. */
export function canvasToVoxel(
  px: number,
  py: number,
  axis: Axis,
  index: number,
  view: ViewTransform,
  volumeShape: [number, number, number],
): [number, number, number] | null {
  const texel = canvasToTexel(px, py, view, sliceDims(axis, volumeShape));
  if (!texel) return null;
  return sliceToVoxel(axis, index, texel.row, texel.col);
}

/** Forward map: voxel -> canvas centre on the displayed slice (or null). */
export function voxelToCanvas(
  voxel: [number, number, number],
  axis: Axis,
  index: number,
  view: ViewTransform,
): { x: number; y: number } | null {
  const pos = voxelToSlice(axis, index, voxel);
  if (!pos) return null;
  return texelToCanvas(pos.row, pos.col, view);
}
