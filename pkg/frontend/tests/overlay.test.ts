import { describe, expect, it } from 'vitest';
import { applyWindowLevel, composeSlice, DEFAULT_WINDOW } from '../src/overlay';

describe('window/level', () => {
  it('default window is identity on 8-bit values', () => {
    expect(applyWindowLevel(0, DEFAULT_WINDOW)).toBe(0);
    expect(applyWindowLevel(128, DEFAULT_WINDOW)).toBe(128);
    expect(applyWindowLevel(255, DEFAULT_WINDOW)).toBe(255);
  });

  it('narrow window clips and stretches', () => {
    const wl = { level: 100, width: 40 }; // display [80, 120]
    expect(applyWindowLevel(80, wl)).toBe(0);
    expect(applyWindowLevel(120, wl)).toBe(255);
    expect(applyWindowLevel(100, wl)).toBe(128);
    expect(applyWindowLevel(0, wl)).toBe(0);
    expect(applyWindowLevel(255, wl)).toBe(255);
  });
});

describe('mask overlay compositing', () => {
  const intensity = new Uint8Array([10, 200, 90, 30]);
  const mask = new Uint8Array([0, 1, 1, 0]);

  it('opacity 0 renders the intensity image only', () => {
    const rgba = composeSlice(intensity, mask, 2, 2, 0);
    for (let i = 0; i < 4; i++) {
      expect(rgba[i * 4]).toBe(intensity[i]);
      expect(rgba[i * 4 + 1]).toBe(intensity[i]);
      expect(rgba[i * 4 + 2]).toBe(intensity[i]);
      expect(rgba[i * 4 + 3]).toBe(255);
    }
  });

  it('mask pixels blend toward red by exactly the overlay opacity', () => {
    const opacity = 0.4;
    const rgba = composeSlice(intensity, mask, 2, 2, opacity);
    // unmasked pixel untouched
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([10, 10, 10]);
    // masked pixel: r = 0.6*g + 0.4*255, g = b = 0.6*g
    expect(rgba[4]).toBe(Math.round(0.6 * 200 + 0.4 * 255));
    expect(rgba[5]).toBe(Math.round(0.6 * 200));
    expect(rgba[6]).toBe(Math.round(0.6 * 200));
    expect(rgba[8]).toBe(Math.round(0.6 * 90 + 0.4 * 255));
  });

  it('full opacity paints masked pixels pure red', () => {
    const rgba = composeSlice(intensity, mask, 2, 2, 1.0);
    expect([rgba[4], rgba[5], rgba[6]]).toEqual([255, 0, 0]);
  });

  it('rejects mismatched buffer sizes', () => {
    expect(() => composeSlice(intensity, new Uint8Array(3), 2, 2)).toThrow();
  });
});
