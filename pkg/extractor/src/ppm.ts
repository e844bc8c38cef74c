/**
 * Minimal netpbm decoder: binary PPM (P6, RGB) and PGM (P5, grayscale),
 * 8-bit samples. The extractor deliberately supports only these formats --
 * they are trivial to produce from any image tool (e.g. Pillow's .save with
 * format="PPM") and need no native codec.
 */

export interface DecodedImage {
  width: number
  height: number
  channels: number
  /** row-major [y][x][c], values in [0, 1] */
  data: Float32Array
}

export function decodeNetpbm(data: Buffer): DecodedImage {
  const magic = data.toString('ascii', 0, 2)
  if (magic !== 'P5' && magic !== 'P6') {
    throw new Error(`unsupported image format (expected P5/P6 netpbm, got ${JSON.stringify(magic)})`)
  }
  const channels = magic === 'P6' ? 3 : 1

  // header: magic, width, height, maxval as whitespace-separated tokens,
  // with '#' comments allowed; a single whitespace byte ends the header
  let offset = 2
  const fields: number[] = []
  while (fields.length < 3) {
    if (offset >= data.length) throw new Error('truncated netpbm header')
    const byte = data[offset]
    if (byte === 0x23) {
      // comment until end of line
      while (offset < data.length && data[offset] !== 0x0a) offset++
      offset++
      continue
    }
    if (byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d) {
      offset++
      continue
    }
    let end = offset
    while (end < data.length && data[end] >= 0x30 && data[end] <= 0x39) end++
    if (end === offset) throw new Error(`bad netpbm header byte at offset ${offset}`)
    fields.push(Number(data.toString('ascii', offset, end)))
    offset = end
  }
  offset++ // single whitespace after maxval
  const [width, height, maxval] = fields
  if (width <= 0 || height <= 0) throw new Error('bad netpbm dimensions')
  if (maxval <= 0 || maxval > 255) throw new Error(`unsupported netpbm maxval ${maxval}`)

  const expected = width * height * channels
  if (data.length - offset < expected) {
    throw new Error(`truncated netpbm payload (${data.length - offset} of ${expected} bytes)`)
  }
  const pixels = new Float32Array(expected)
  for (let i = 0; i < expected; i++) {
    pixels[i] = data[offset + i] / maxval
  }
  return { width, height, channels, data: pixels }
}

/** P6 encoder, handy for fixtures and round-trip tests */
export function encodePpm(width: number, height: number, rgb: Uint8Array): Buffer {
  if (rgb.length !== width * height * 3) throw new Error('rgb payload size mismatch')
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(rgb)])
}
