import { describe, expect, it, vi } from 'vitest'

import { ModelUnavailableError } from '../src/errors.js'
import { IMAGE_DIM, ImageEncoder } from '../src/imageEncoder.js'
import { decodeNetpbm, encodePpm } from '../src/ppm.js'
import { MAX_TOKENS, TEXT_DIM, TextEncoder as CaptionEncoder } from '../src/textEncoder.js'

describe('caption encoder', () => {
  it('emits 1024-d finite vectors', () => {
    const vec = new CaptionEncoder().encode('a pink flower bush in a garden')
    expect(vec.length).toBe(TEXT_DIM)
    expect([...vec].every(Number.isFinite)).toBe(true)
  })

  it('is deterministic across instances', () => {
    const a = new CaptionEncoder('seeded', 7).encode('two dogs on grass')
    const b = new CaptionEncoder('seeded', 7).encode('two dogs on grass')
    expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(true)
  })

  it('separates different captions and different seeds', () => {
    const encoder = new CaptionEncoder()
    const a = encoder.encode('a red house')
    const b = encoder.encode('a blue house')
    expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(false)
    const other = new CaptionEncoder('seeded', 99).encode('a red house')
    expect(Buffer.from(a.buffer).equals(Buffer.from(other.buffer))).toBe(false)
  })

  it('is sensitive to word order', () => {
    const encoder = new CaptionEncoder()
    const ab = encoder.encode('house red')
    const ba = encoder.encode('red house')
    expect(Buffer.from(ab.buffer).equals(Buffer.from(ba.buffer))).toBe(false)
  })

  it('truncates over-long captions at the encoder maximum and logs it', () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {})
    try {
      const encoder = new CaptionEncoder()
      const long = Array.from({ length: MAX_TOKENS + 50 }, (_, i) => `tok${i}`).join(' ')
      const truncated = Array.from({ length: MAX_TOKENS }, (_, i) => `tok${i}`).join(' ')
      const a = encoder.encode(long)
      expect(warn).toHaveBeenCalledOnce()
      const b = encoder.encode(truncated)
      expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(true)
    } finally {
      warn.mockRestore()
    }
  })

  it('refuses named pretrained backends', () => {
    expect(() => new CaptionEncoder('bert-large')).toThrow(ModelUnavailableError)
    expect(() => new CaptionEncoder('bert-large')).toThrow(/model unavailable/)
  })
})

function solidPpm(width: number, height: number, rgb: [number, number, number]): Buffer {
  const data = new Uint8Array(width * height * 3)
  for (let i = 0; i < width * height; i++) data.set(rgb, i * 3)
  return encodePpm(width, height, data)
}

describe('image encoder', () => {
  it('emits 2048-d finite vectors', () => {
    const vec = new ImageEncoder().encode(decodeNetpbm(solidPpm(8, 6, [200, 30, 90])))
    expect(vec.length).toBe(IMAGE_DIM)
    expect([...vec].every(Number.isFinite)).toBe(true)
  })

  it('accepts a blank all-zero image', () => {
    const vec = new ImageEncoder().encode(decodeNetpbm(solidPpm(4, 4, [0, 0, 0])))
    expect([...vec].every(Number.isFinite)).toBe(true)
  })

  it('gives identical vectors for identical image bytes', () => {
    const bytes = solidPpm(5, 7, [10, 220, 64])
    const encoder = new ImageEncoder()
    const a = encoder.encode(decodeNetpbm(bytes))
    const b = encoder.encode(decodeNetpbm(bytes))
    expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(true)
  })

  it('distinguishes different images', () => {
    const encoder = new ImageEncoder()
    const a = encoder.encode(decodeNetpbm(solidPpm(4, 4, [255, 0, 0])))
    const b = encoder.encode(decodeNetpbm(solidPpm(4, 4, [0, 0, 255])))
    expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(false)
  })

  it('reads grayscale P5 images', () => {
    const pixels = Buffer.from([0, 64, 128, 255])
    const pgm = Buffer.concat([Buffer.from('P5\n2 2\n255\n', 'ascii'), pixels])
    const image = decodeNetpbm(pgm)
    expect(image.channels).toBe(1)
    const vec = new ImageEncoder().encode(image)
    expect(vec.length).toBe(IMAGE_DIM)
  })

  it('refuses named pretrained backends', () => {
    expect(() => new ImageEncoder('resnet50v2')).toThrow(ModelUnavailableError)
  })
})

describe('netpbm decoding', () => {
  it('round-trips pixel values', () => {
    const image = decodeNetpbm(solidPpm(2, 2, [255, 0, 128]))
    expect(image.width).toBe(2)
    expect(image.height).toBe(2)
    expect(image.data[0]).toBe(1)
    expect(image.data[1]).toBe(0)
    expect(image.data[2]).toBeCloseTo(128 / 255, 6)
  })

  it('supports header comments', () => {
    const data = Buffer.concat([
      Buffer.from('P6\n# a comment\n1 1\n255\n', 'ascii'),
      Buffer.from([1, 2, 3]),
    ])
    expect(decodeNetpbm(data).width).toBe(1)
  })

  it('rejects other formats and truncated payloads', () => {
    expect(() => decodeNetpbm(Buffer.from('GIF89a'))).toThrow(/unsupported image format/)
    const short = solidPpm(2, 2, [1, 1, 1]).subarray(0, 14)
    expect(() => decodeNetpbm(short)).toThrow(/truncated/)
  })
})
