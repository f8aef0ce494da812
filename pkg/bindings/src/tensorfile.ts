/**
 * Reader/writer for the `.fvlm` binary tensor container.
 *
 * Layout (little-endian): magic "FVLM", u32 version = 1, u8 dtype = 1
 * (float32), u8 rank (1 or 2), two zero pad bytes, rank x u64 dims, then the
 * row-major float32 payload. Round-trips are bit-exact on the payload.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { endianness } from "node:os";

export const MAGIC = "FVLM";
export const VERSION = 1;
export const DTYPE_F32 = 1;

/** Refuse absurd allocations before touching the payload. */
export const MAX_ELEMENTS = 1 << 28;

export interface Tensor {
  /** Shape; length 1 for score vectors, 2 for feature matrices. */
  dims: number[];
  /** Row-major payload. */
  data: Float32Array;
}

export class TensorFormatError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(`${message} (offset ${offset})`);
    this.name = "TensorFormatError";
    this.offset = offset;
  }
}

/** Throws unless the value is a real Float32Array (no silent casts). */
export function requireFloat32(data: unknown, what: string): Float32Array {
  if (data instanceof Float32Array) return data;
  const got =
    data instanceof Float64Array
      ? "Float64Array"
      : Object.prototype.toString.call(data);
  throw new TypeError(`${what}: expected Float32Array, got ${got}; refusing to cast`);
}

function elementCount(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

export function writeTensor(path: string, tensor: Tensor): void {
  const { dims } = tensor;
  const data = requireFloat32(tensor.data, "tensor payload");
  if (dims.length !== 1 && dims.length !== 2) {
    throw new TensorFormatError(`unsupported rank ${dims.length}`, 9);
  }
  if (dims.some((d) => !Number.isInteger(d) || d < 0)) {
    throw new RangeError(`dims must be non-negative integers, got ${dims}`);
  }
  if (elementCount(dims) !== data.length) {
    throw new RangeError(
      `payload length ${data.length} does not match dims ${dims}`
    );
  }
  for (const x of data) {
    if (!Number.isFinite(x)) throw new RangeError("payload contains non-finite values");
  }

  const headerLen = 12 + 8 * dims.length;
  const header = Buffer.alloc(headerLen);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt8(DTYPE_F32, 8);
  header.writeUInt8(dims.length, 9);
  for (let i = 0; i < dims.length; i++) {
    header.writeBigUInt64LE(BigInt(dims[i]), 12 + 8 * i);
  }

  let payload: Buffer;
  if (endianness() === "LE") {
    // zero-copy view over the typed array's memory
    payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  } else {
    payload = Buffer.alloc(4 * data.length);
    for (let i = 0; i < data.length; i++) payload.writeFloatLE(data[i], 4 * i);
  }
  writeFileSync(path, Buffer.concat([header, payload]));
}

export function readTensor(path: string): Tensor {
  const blob = readFileSync(path);
  if (blob.length < 12) {
    throw new TensorFormatError("file shorter than the fixed header", blob.length);
  }
  if (blob.toString("ascii", 0, 4) !== MAGIC) {
    throw new TensorFormatError(
      `bad magic ${JSON.stringify(blob.toString("latin1", 0, 4))}`,
      0
    );
  }
  const version = blob.readUInt32LE(4);
  if (version !== VERSION) {
    throw new TensorFormatError(`unsupported version ${version}`, 4);
  }
  const dtype = blob.readUInt8(8);
  if (dtype !== DTYPE_F32) {
    throw new TensorFormatError(`unsupported dtype code ${dtype}`, 8);
  }
  const rank = blob.readUInt8(9);
  if (rank !== 1 && rank !== 2) {
    throw new TensorFormatError(`unsupported rank ${rank}`, 9);
  }
  if (blob.readUInt8(10) !== 0 || blob.readUInt8(11) !== 0) {
    throw new TensorFormatError("nonzero pad bytes", 10);
  }
  const dimsEnd = 12 + 8 * rank;
  if (blob.length < dimsEnd) {
    throw new TensorFormatError("truncated dimension list", blob.length);
  }
  const dims: number[] = [];
  for (let i = 0; i < rank; i++) {
    const d = blob.readBigUInt64LE(12 + 8 * i);
    if (d > BigInt(MAX_ELEMENTS)) {
      throw new TensorFormatError(`element count ${d} exceeds limit`, 12);
    }
    dims.push(Number(d));
  }
  const count = elementCount(dims);
  if (count > MAX_ELEMENTS) {
    throw new TensorFormatError(`element count ${count} exceeds limit`, 12);
  }
  if (blob.length !== dimsEnd + 4 * count) {
    throw new TensorFormatError(
      `payload length ${blob.length - dimsEnd} != expected ${4 * count}`,
      dimsEnd
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = blob.readFloatLE(dimsEnd + 4 * i);
  return { dims, data };
}
