/**
 * Token mask utilities.
 *
 * The engine's mask wire format is a string of little-endian u32 words:
 * bit (i mod 32) of word (i div 32) marks token i as permitted, and bits
 * beyond the vocabulary size are zero.  The session protocol ships masks
 * as the hex encoding of that byte stream.
 */

/** Number of u32 words a mask over `vocabSize` tokens occupies. */
export function maskWordCount(vocabSize: number): number {
  return Math.ceil(vocabSize / 32);
}

/** Decode a protocol hex mask into freshly allocated words. */
export function maskFromHex(hex: string, vocabSize: number): Uint32Array {
  const words = new Uint32Array(maskWordCount(vocabSize));
  decodeHexInto(hex, words);
  return words;
}

/** Decode a protocol hex mask into a caller-owned buffer, in place. */
export function decodeHexInto(hex: string, out: Uint32Array): void {
  if (hex.length !== out.length * 8) {
    throw new RangeError(
      `mask hex length ${hex.length} does not fill ${out.length} words`,
    );
  }
  for (let w = 0; w < out.length; w++) {
    // little-endian: the first byte pair is the lowest byte of the word
    const o = w * 8;
    const b0 = parseInt(hex.slice(o, o + 2), 16);
    const b1 = parseInt(hex.slice(o + 2, o + 4), 16);
    const b2 = parseInt(hex.slice(o + 4, o + 6), 16);
    const b3 = parseInt(hex.slice(o + 6, o + 8), 16);
    if (Number.isNaN(b0) || Number.isNaN(b1) || Number.isNaN(b2) || Number.isNaN(b3)) {
      throw new RangeError(`bad hex in mask at word ${w}`);
    }
    out[w] = (b0 | (b1 << 8) | (b2 << 16) | (b3 << 24)) >>> 0;
  }
}

/** Encode mask words back to the protocol hex form. */
export function maskToHex(words: Uint32Array): string {
  const bytes = new Uint8Array(words.length * 4);
  for (let w = 0; w < words.length; w++) {
    bytes[w * 4] = words[w] & 0xff;
    bytes[w * 4 + 1] = (words[w] >>> 8) & 0xff;
    bytes[w * 4 + 2] = (words[w] >>> 16) & 0xff;
    bytes[w * 4 + 3] = (words[w] >>> 24) & 0xff;
  }
  return Buffer.from(bytes).toString("hex");
}

/** Is token `tid` permitted? */
export function isAllowed(words: Uint32Array, tid: number): boolean {
  return ((words[tid >>> 5] >>> (tid & 31)) & 1) === 1;
}

/** Permitted token ids in ascending order. */
export function allowedIds(words: Uint32Array, vocabSize: number): number[] {
  const out: number[] = [];
  for (let tid = 0; tid < vocabSize; tid++) {
    if (isAllowed(words, tid)) out.push(tid);
  }
  return out;
}

/** Number of permitted tokens. */
export function popcount(words: Uint32Array): number {
  let total = 0;
  for (let w = 0; w < words.length; w++) {
    let v = words[w];
    v = v - ((v >>> 1) & 0x55555555);
    v = (v & 0x33333333) + ((v >>> 2) & 0x33333333);
    total += (((v + (v >>> 4)) & 0x0f0f0f0f) * 0x01010101) >>> 24;
  }
  return total;
}

export function masksEqual(a: Uint32Array, b: Uint32Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}
