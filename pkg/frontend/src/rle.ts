import type { RlePayload } from './types';

/** Decode alternating-run RLE (background run first, possibly length 0). */
export function decodeRle(payload: RlePayload): Uint8Array {
  const total = payload.shape.reduce((a, b) => a * b, 1);
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of payload.counts) {
    if (run < 0) throw new Error(`negative RLE run ${run}`);
    if (value === 1) out.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  if (pos !== total) {
    throw new Error(`RLE counts cover ${pos} of ${total} voxels`);
  }
  return out;
}

/** Encode a binary buffer; mirror of the server codec, used in tests. */
export function encodeRle(data: Uint8Array, shape: number[]): RlePayload {
  const counts: number[] = [];
  let value = 0;
  let run = 0;
  for (let i = 0; i < data.length; i++) {
    const bit = data[i] ? 1 : 0;
    if (bit === value) {
      run += 1;
    } else {
      counts.push(run);
      value = bit;
      run = 1;
    }
  }
  counts.push(run);
  return { shape, counts };
}

export function decodeBase64Bytes(b64: string): Uint8Array {
  if (typeof atob === 'function') {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return Uint8Array.from(Buffer.from(b64, 'base64'));
}
