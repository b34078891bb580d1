import { describe, expect, it } from 'vitest';
import { decodeBase64Bytes, decodeRle, encodeRle } from '../src/rle';

describe('RLE codec', () => {
  it('decodes alternating runs starting with background', () => {
    const out = decodeRle({ shape: [2, 3], counts: [2, 2, 2] });
    expect(Array.from(out)).toEqual([0, 0, 1, 1, 0, 0]);
  });

  it('handles the leading zero-length background run', () => {
    const out = decodeRle({ shape: [4], counts: [0, 4] });
    expect(Array.from(out)).toEqual([1, 1, 1, 1]);
  });

  it('handles all background', () => {
    expect(Array.from(decodeRle({ shape: [3], counts: [3] }))).toEqual([0, 0, 0]);
  });

  it('rejects count mismatches', () => {
    expect(() => decodeRle({ shape: [2, 2], counts: [1, 1] })).toThrow();
    expect(() => decodeRle({ shape: [2], counts: [-1, 3] })).toThrow();
  });

  it('round-trips random buffers through the mirrored encoder', () => {
    let seed = 1234;
    const rand = () => ((seed = (seed * 1103515245 + 12345) & 0x7fffffff) / 0x7fffffff);
    for (let trial = 0; trial < 50; trial++) {
      const n = 1 + Math.floor(rand() * 64);
      const data = new Uint8Array(n);
      for (let i = 0; i < n; i++) data[i] = rand() > 0.5 ? 1 : 0;
      const decoded = decodeRle(encodeRle(data, [n]));
      expect(Array.from(decoded)).toEqual(Array.from(data));
    }
  });
});

describe('base64 bytes', () => {
  it('decodes a known payload', () => {
    const bytes = decodeBase64Bytes(Buffer.from([0, 128, 255, 7]).toString('base64'));
    expect(Array.from(bytes)).toEqual([0, 128, 255, 7]);
  });
});
