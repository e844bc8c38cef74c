#!/usr/bin/env node
/**
 * cosmic-extract --manifest FILE --modality text|image --out STORE
 *                [--backend seeded] [--seed N]
 *
 * Reads a JSONL manifest ({"text"} lines for captions, {"key","path"} lines
 * for images) and writes a CSMF feature store the python toolkit can read.
 * Exits 0 on success, 1 on usage errors, 2 on data errors.
 */

import { readFile } from 'node:fs/promises'

import { UsageError } from './errors.js'
import {
  extractImageFeatures,
  extractTextFeatures,
  parseCaptionManifest,
  parseImageManifest,
} from './extract.js'
import { ImageEncoder } from './imageEncoder.js'
import { TextEncoder as CaptionEncoder } from './textEncoder.js'

const SYNOPSIS =
  'usage: cosmic-extract --manifest FILE --modality text|image --out STORE [--backend seeded] [--seed N]'

interface Args {
  manifest: string
  modality: 'text' | 'image'
  out: string
  backend: string
  seed: number
}

function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {}
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i]
    if (!flag.startsWith('--')) throw new UsageError(`unexpected argument ${flag}`)
    const value = argv[i + 1]
    if (value === undefined) throw new UsageError(`missing value for ${flag}`)
    values[flag.slice(2)] = value
  }
  for (const required of ['manifest', 'modality', 'out']) {
    if (!(required in values)) throw new UsageError(`--${required} is required`)
  }
  const known = new Set(['manifest', 'modality', 'out', 'backend', 'seed'])
  for (const flag of Object.keys(values)) {
    if (!known.has(flag)) throw new UsageError(`unknown flag --${flag}`)
  }
  if (values.modality !== 'text' && values.modality !== 'image') {
    throw new UsageError(`--modality must be text or image, got ${values.modality}`)
  }
  const seed = values.seed === undefined ? 1 : Number(values.seed)
  if (!Number.isInteger(seed)) throw new UsageError(`--seed must be an integer`)
  return {
    manifest: values.manifest,
    modality: values.modality,
    out: values.out,
    backend: values.backend ?? 'seeded',
    seed,
  }
}

export async function run(argv: string[]): Promise<number> {
  let args: Args
  try {
    args = parseArgs(argv)
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    console.error(SYNOPSIS)
    return 1
  }
  try {
    const lines = (await readFile(args.manifest, 'utf-8')).split('\n').filter((l) => l.trim())
    const result =
      args.modality === 'text'
        ? await extractTextFeatures(
            parseCaptionManifest(lines),
            args.out,
            new CaptionEncoder(args.backend, args.seed),
          )
        : await extractImageFeatures(
            parseImageManifest(lines),
            args.out,
            new ImageEncoder(args.backend, args.seed),
          )
    console.log(
      `${args.out}: ${result.written} records (dim ${result.store.dim}), ${result.skipped} skipped`,
    )
    return 0
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 2
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!)
if (invokedDirectly) {
  run(process.argv.slice(2)).then((code) => process.exit(code))
}
