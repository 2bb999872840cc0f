import assert from "node:assert/strict";
import { test } from "node:test";

import {
  allowedIds,
  decodeHexInto,
  isAllowed,
  maskFromHex,
  maskToHex,
  maskWordCount,
  masksEqual,
  popcount,
} from "../src/bitset.js";

test("word count", () => {
  assert.equal(maskWordCount(1), 1);
  assert.equal(maskWordCount(32), 1);
  assert.equal(maskWordCount(33), 2);
  assert.equal(maskWordCount(59), 2);
});

test("hex round trip, little-endian layout", () => {
  // bits 0, 33 and 58 over a 59-token vocabulary
  const words = new Uint32Array([0x00000001, (1 << 1) | (1 << 26)]);
  const hex = maskToHex(words);
  assert.equal(hex, "0100000002000004");
  const back = maskFromHex(hex, 59);
  assert.ok(masksEqual(words, back));
  assert.ok(isAllowed(back, 0));
  assert.ok(isAllowed(back, 33));
  assert.ok(isAllowed(back, 58));
  assert.ok(!isAllowed(back, 1));
  assert.deepEqual(allowedIds(back, 59), [0, 33, 58]);
  assert.equal(popcount(back), 3);
});

test("high bit survives the sign trap", () => {
  const words = maskFromHex("00000080", 32);
  assert.equal(words[0], 0x80000000);
  assert.ok(isAllowed(words, 31));
  assert.equal(maskToHex(words), "00000080");
});

test("buffer size is enforced", () => {
  const out = new Uint32Array(2);
  assert.throws(() => decodeHexInto("0011", out), RangeError);
  assert.throws(() => decodeHexInto("zz000000zz000000", out), RangeError);
});
