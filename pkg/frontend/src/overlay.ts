/** Pixel compositing for slice rendering, independent of the canvas API so it
 * is unit-testable. Mask voxels blend toward pure red at the given opacity. */

export const MASK_COLOR: [number, number, number] = [255, 0, 0];
export const DEFAULT_OVERLAY_OPACITY = 0.4;

export interface WindowLevel {
  level: number; // display centre, in 8-bit units
  width: number; // display range, in 8-bit units
}

export const DEFAULT_WINDOW: WindowLevel = { level: 128, width: 256 };

export function applyWindowLevel(value: number, wl: WindowLevel): number {
  const lo = wl.level - wl.width / 2;
  const t = ((value - lo) * 256) / wl.width;
  return Math.max(0, Math.min(255, Math.round(t)));
}

export function composeSlice(
  intensity: Uint8Array,
  mask: Uint8Array,
  width: number,
  height: number,
  opacity: number = DEFAULT_OVERLAY_OPACITY,
  wl: WindowLevel = DEFAULT_WINDOW,
): Uint8ClampedArray {
  if (intensity.length !== width * height || mask.length !== width * height) {
    throw new Error(
      `buffer sizes ${intensity.length}/${mask.length} do not match ${width}x${height}`,
    );
  }
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < intensity.length; i++) {
    const g = applyWindowLevel(intensity[i], wl);
    let r = g;
    let gg = g;
    let b = g;
    if (mask[i]) {
      r = Math.round((1 - opacity) * g + opacity * MASK_COLOR[0]);
      gg = Math.round((1 - opacity) * g + opacity * MASK_COLOR[1]);
      b = Math.round((1 - opacity) * g + opacity * MASK_COLOR[2]);
    }
    out[i * 4] = r;
    out[i * 4 + 1] = gg;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = 255;
  }
  return out;
}
