/**
 * CSMF v1 store format, byte-compatible with the python toolkit's reader:
 *
 *   magic "CSMF" | version u32 = 1 | dim u32 | count u32 | count * record
 *   record = key_len u16 | key bytes (UTF-8) | dim * f32
 *
 * Little-endian, no padding; records sorted by key bytes so files are
 * canonical. Caption vectors are keyed "txt:<hex>" with <hex> the lowercase
 * 16-digit hex of the 64-bit FNV-1a hash of the exact caption text; image
 * vectors are keyed "img:<image_key>".
 */

export const MAGIC = 'CSMF'
export const VERSION = 1
const MAX_KEY_BYTES = 0xffff

const MASK64 = (1n << 64n) - 1n
const FNV_OFFSET = 0xcbf29ce484222325n
const FNV_PRIME = 0x100000001b3n

export function fnv1a64(data: Uint8Array): bigint {
  let hash = FNV_OFFSET
  for (const byte of data) {
    hash = ((hash ^ BigInt(byte)) * FNV_PRIME) & MASK64
  }
  return hash
}

export function textKey(text: string): string {
  const hash = fnv1a64(new TextEncoder().encode(text))
  return 'txt:' + hash.toString(16).padStart(16, '0')
}

export function imageKey(key: string): string {
  return 'img:' + key
}

export interface FeatureStore {
  dim: number
  entries: Map<string, Float32Array>
}

export function createStore(dim: number): FeatureStore {
  if (!Number.isInteger(dim) || dim <= 0) {
    throw new Error(`dim must be a positive integer, got ${dim}`)
  }
  return { dim, entries: new Map() }
}

export function addVector(store: FeatureStore, key: string, vector: Float32Array): void {
  if (!key) throw new Error('empty key')
  if (Buffer.byteLength(key, 'utf-8') > MAX_KEY_BYTES) {
    throw new Error(`key longer than ${MAX_KEY_BYTES} UTF-8 bytes`)
  }
  if (store.entries.has(key)) throw new Error(`duplicate key ${JSON.stringify(key)}`)
  if (vector.length !== store.dim) {
    throw new Error(`vector for ${JSON.stringify(key)} has ${vector.length} entries, expected ${store.dim}`)
  }
  for (const value of vector) {
    if (!Number.isFinite(value)) {
      throw new Error(`vector for ${JSON.stringify(key)} contains non-finite values`)
    }
  }
  store.entries.set(key, vector)
}

export function serializeStore(store: FeatureStore): Buffer {
  const keys = [...store.entries.keys()].sort((a, b) =>
    Buffer.compare(Buffer.from(a, 'utf-8'), Buffer.from(b, 'utf-8')),
  )
  const chunks: Buffer[] = []
  const header = Buffer.alloc(16)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt32LE(VERSION, 4)
  header.writeUInt32LE(store.dim, 8)
  header.writeUInt32LE(keys.length, 12)
  chunks.push(header)
  for (const key of keys) {
    const raw = Buffer.from(key, 'utf-8')
    const head = Buffer.alloc(2)
    head.writeUInt16LE(raw.length, 0)
    const payload = Buffer.alloc(4 * store.dim)
    const vector = store.entries.get(key)!
    for (let i = 0; i < store.dim; i++) {
      payload.writeFloatLE(vector[i], 4 * i)
    }
    chunks.push(head, raw, payload)
  }
  return Buffer.concat(chunks)
}

export function parseStore(data: Buffer): FeatureStore {
  if (data.length < 16 || data.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('bad magic at offset 0')
  }
  const version = data.readUInt32LE(4)
  if (version !== VERSION) throw new Error(`unsupported version ${version}`)
  const dim = data.readUInt32LE(8)
  const count = data.readUInt32LE(12)
  const store = createStore(dim)
  let offset = 16
  for (let record = 0; record < count; record++) {
    if (offset + 2 > data.length) throw new Error(`truncated record at offset ${offset}`)
    const keyLen = data.readUInt16LE(offset)
    offset += 2
    if (offset + keyLen + 4 * dim > data.length) {
      throw new Error(`truncated record at offset ${offset}`)
    }
    const key = data.toString('utf-8', offset, offset + keyLen)
    offset += keyLen
    const vector = new Float32Array(dim)
    for (let i = 0; i < dim; i++) {
      vector[i] = data.readFloatLE(offset + 4 * i)
    }
    offset += 4 * dim
    addVector(store, key, vector)
  }
  if (offset !== data.length) throw new Error(`trailing data at offset ${offset}`)
  return store
}

export function cosineSimilarity(a: Float32Array, b: Float32Array): number {
  if (a.length !== b.length) throw new Error('vector size mismatch')
  let dot = 0
  let normA = 0
  let normB = 0
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i]
    normA += a[i] * a[i]
    normB += b[i] * b[i]
  }
  return dot / (Math.sqrt(normA) * Math.sqrt(normB))
}
