/**
 * Caption-level sentence vectors (1024-d), CLS-style: one fixed-width
 * vector summarizing the whole caption.
 *
 * The default "seeded" backend runs a deterministic pipeline with weights
 * derived from a seed instead of downloaded checkpoints: per-token
 * embeddings (hash-seeded), position-decayed pooling so token order
 * matters, and a fixed projection with tanh squashing. Captions are
 * truncated at the encoder's 512-token maximum (logged). Requesting any
 * named pretrained backend fails with ModelUnavailableError.
 */

import { ModelUnavailableError } from './errors.js'
import { SplitMix64, seedFrom } from './rng.js'

export const TEXT_DIM = 1024
export const MAX_TOKENS = 512

const HIDDEN = 256

export class TextEncoder {
  readonly dim = TEXT_DIM
  private readonly seed: number
  private readonly projection: Float64Array // HIDDEN x TEXT_DIM, row-major
  private readonly embeddings = new Map<string, Float64Array>()
  private truncationLogged = false

  constructor(backend = 'seeded', seed = 1) {
    if (backend !== 'seeded') throw new ModelUnavailableError(backend)
    this.seed = seed
    const rng = new SplitMix64(seedFrom(['text-projection', seed]))
    this.projection = rng.uniformArray(HIDDEN * TEXT_DIM, 1 / Math.sqrt(HIDDEN))
  }

  private tokenize(text: string): string[] {
    const tokens = text.toLowerCase().split(/[^\p{L}\p{N}]+/u).filter(Boolean)
    if (tokens.length > MAX_TOKENS) {
      if (!this.truncationLogged) {
        console.warn(`caption longer than ${MAX_TOKENS} tokens; truncating (logged once)`)
        this.truncationLogged = true
      }
      return tokens.slice(0, MAX_TOKENS)
    }
    return tokens.length ? tokens : ['<empty>']
  }

  private embedding(token: string): Float64Array {
    let vector = this.embeddings.get(token)
    if (!vector) {
      const rng = new SplitMix64(seedFrom(['token', this.seed, token]))
      vector = rng.uniformArray(HIDDEN)
      this.embeddings.set(token, vector)
    }
    return vector
  }

  encode(text: string): Float32Array {
    const tokens = this.tokenize(text)
    // position-decayed pooling: earlier tokens weigh more, so the vector
    // is sensitive to word order, not just the bag of words
    const pooled = new Float64Array(HIDDEN)
    for (let position = 0; position < tokens.length; position++) {
      const weight = 1 / (1 + position)
      const emb = this.embedding(tokens[position])
      for (let j = 0; j < HIDDEN; j++) pooled[j] += weight * emb[j]
    }
    const out = new Float32Array(TEXT_DIM)
    for (let k = 0; k < TEXT_DIM; k++) {
      let sum = 0
      for (let j = 0; j < HIDDEN; j++) sum += this.projection[j * TEXT_DIM + k] * pooled[j]
      out[k] = Math.tanh(sum)
    }
    return out
  }
}
