/**
 * Global image features (2048-d): a small convolutional stack ending in a
 * per-pixel projection to 2048 channels and a global average pool, the
 * standard pooled-backbone shape.
 *
 * The default "seeded" backend derives every filter from a seed, so
 * identical image bytes always produce identical vectors with no
 * downloaded weights. Inputs are decoded netpbm images, resized to a fixed
 * 64x64 resolution (nearest neighbor) like any fixed-input backbone.
 * Requesting a named pretrained backend fails with ModelUnavailableError.
 */

import { ModelUnavailableError } from './errors.js'
import { DecodedImage } from './ppm.js'
import { SplitMix64, seedFrom } from './rng.js'

export const IMAGE_DIM = 2048
export const INPUT_SIZE = 64

const CONV_CHANNELS = [8, 16, 32]
const KERNEL = 3
const STRIDE = 2

interface ConvLayer {
  inChannels: number
  outChannels: number
  weights: Float64Array // [out][ky][kx][in]
  bias: Float64Array
}

function makeConv(inChannels: number, outChannels: number, seed: number, index: number): ConvLayer {
  const rng = new SplitMix64(seedFrom(['conv', seed, index]))
  const fanIn = KERNEL * KERNEL * inChannels
  return {
    inChannels,
    outChannels,
    weights: rng.uniformArray(outChannels * KERNEL * KERNEL * inChannels, 1 / Math.sqrt(fanIn)),
    bias: rng.uniformArray(outChannels, 0.1),
  }
}

interface FeatureMap {
  width: number
  height: number
  channels: number
  data: Float64Array // [y][x][c]
}

function resizeToInput(image: DecodedImage): FeatureMap {
  // nearest neighbor to INPUT_SIZE^2, grayscale replicated to 3 channels
  const data = new Float64Array(INPUT_SIZE * INPUT_SIZE * 3)
  for (let y = 0; y < INPUT_SIZE; y++) {
    const srcY = Math.min(image.height - 1, Math.floor((y * image.height) / INPUT_SIZE))
    for (let x = 0; x < INPUT_SIZE; x++) {
      const srcX = Math.min(image.width - 1, Math.floor((x * image.width) / INPUT_SIZE))
      const src = (srcY * image.width + srcX) * image.channels
      const dst = (y * INPUT_SIZE + x) * 3
      for (let c = 0; c < 3; c++) {
        data[dst + c] = image.data[src + (image.channels === 3 ? c : 0)]
      }
    }
  }
  return { width: INPUT_SIZE, height: INPUT_SIZE, channels: 3, data }
}

function convolve(input: FeatureMap, layer: ConvLayer): FeatureMap {
  const outH = Math.max(1, Math.ceil(input.height / STRIDE))
  const outW = Math.max(1, Math.ceil(input.width / STRIDE))
  const out = new Float64Array(outH * outW * layer.outChannels)
  const pad = Math.floor(KERNEL / 2)
  for (let oy = 0; oy < outH; oy++) {
    for (let ox = 0; ox < outW; ox++) {
      for (let oc = 0; oc < layer.outChannels; oc++) {
        let sum = layer.bias[oc]
        for (let ky = 0; ky < KERNEL; ky++) {
          const iy = oy * STRIDE + ky - pad
          if (iy < 0 || iy >= input.height) continue
          for (let kx = 0; kx < KERNEL; kx++) {
            const ix = ox * STRIDE + kx - pad
            if (ix < 0 || ix >= input.width) continue
            const src = (iy * input.width + ix) * input.channels
            const wbase = ((oc * KERNEL + ky) * KERNEL + kx) * layer.inChannels
            for (let ic = 0; ic < layer.inChannels; ic++) {
              sum += layer.weights[wbase + ic] * input.data[src + ic]
            }
          }
        }
        out[(oy * outW + ox) * layer.outChannels + oc] = Math.max(0, sum) // ReLU
      }
    }
  }
  return { width: outW, height: outH, channels: layer.outChannels, data: out }
}

export class ImageEncoder {
  readonly dim = IMAGE_DIM
  private readonly convs: ConvLayer[]
  private readonly headWeights: Float64Array // [IMAGE_DIM][lastChannels]
  private readonly headBias: Float64Array

  constructor(backend = 'seeded', seed = 1) {
    if (backend !== 'seeded') throw new ModelUnavailableError(backend)
    this.convs = []
    let channels = 3
    CONV_CHANNELS.forEach((outChannels, index) => {
      this.convs.push(makeConv(channels, outChannels, seed, index))
      channels = outChannels
    })
    const rng = new SplitMix64(seedFrom(['head', seed]))
    this.headWeights = rng.uniformArray(IMAGE_DIM * channels, 1 / Math.sqrt(channels))
    this.headBias = rng.uniformArray(IMAGE_DIM, 0.1)
  }

  encode(image: DecodedImage): Float32Array {
    let map = resizeToInput(image)
    for (const layer of this.convs) map = convolve(map, layer)
    // per-pixel 1x1 projection to IMAGE_DIM with ReLU, then global average
    const positions = map.width * map.height
    const channels = map.channels
    const pooled = new Float64Array(IMAGE_DIM)
    for (let p = 0; p < positions; p++) {
      const src = p * channels
      for (let k = 0; k < IMAGE_DIM; k++) {
        let sum = this.headBias[k]
        const wbase = k * channels
        for (let c = 0; c < channels; c++) {
          sum += this.headWeights[wbase + c] * map.data[src + c]
        }
        if (sum > 0) pooled[k] += sum
      }
    }
    const out = new Float32Array(IMAGE_DIM)
    for (let k = 0; k < IMAGE_DIM; k++) out[k] = pooled[k] / positions
    return out
  }
}
