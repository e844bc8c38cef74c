/**
 * Manifest-driven feature extraction into CSMF stores.
 *
 * Caption manifest: JSONL of {"text": "..."}; image manifest: JSONL of
 * {"key": "...", "path": "..."}. Captions deduplicate by content key (the
 * store is content-addressed); image records deduplicate by key; unreadable
 * images are skipped with a warning and counted.
 */

import { readFile, writeFile } from 'node:fs/promises'

import { FeatureStore, addVector, createStore, imageKey, serializeStore, textKey } from './csmf.js'
import { ImageEncoder } from './imageEncoder.js'
import { decodeNetpbm } from './ppm.js'
import { TextEncoder as CaptionEncoder } from './textEncoder.js'

export interface ImageManifestEntry {
  key: string
  path: string
}

export interface ExtractionResult {
  written: number
  skipped: number
  store: FeatureStore
}

export async function extractTextFeatures(
  captions: string[],
  outPath: string | null,
  encoder = new CaptionEncoder(),
): Promise<ExtractionResult> {
  if (captions.length === 0) throw new Error('no captions to extract')
  const store = createStore(encoder.dim)
  let skipped = 0
  for (const caption of captions) {
    const key = textKey(caption)
    if (store.entries.has(key)) {
      skipped++ // duplicate caption, already embedded
      continue
    }
    addVector(store, key, encoder.encode(caption))
  }
  if (outPath) await writeFile(outPath, serializeStore(store))
  return { written: store.entries.size, skipped, store }
}

export async function extractImageFeatures(
  entries: ImageManifestEntry[],
  outPath: string | null,
  encoder = new ImageEncoder(),
): Promise<ExtractionResult> {
  const store = createStore(encoder.dim)
  let skipped = 0
  for (const entry of entries) {
    const key = imageKey(entry.key)
    if (store.entries.has(key)) {
      skipped++
      continue
    }
    let image
    try {
      image = decodeNetpbm(await readFile(entry.path))
    } catch (err) {
      console.warn(`skipping unreadable image ${entry.path}: ${(err as Error).message}`)
      skipped++
      continue
    }
    addVector(store, key, encoder.encode(image))
  }
  if (outPath) await writeFile(outPath, serializeStore(store))
  return { written: store.entries.size, skipped, store }
}

export function parseCaptionManifest(lines: string[]): string[] {
  return lines.map((line, index) => {
    const record = parseLine(line, index)
    if (typeof record.text !== 'string') {
      throw new Error(`manifest line ${index + 1}: missing "text"`)
    }
    return record.text
  })
}

export function parseImageManifest(lines: string[]): ImageManifestEntry[] {
  return lines.map((line, index) => {
    const record = parseLine(line, index)
    if (typeof record.key !== 'string' || typeof record.path !== 'string') {
      throw new Error(`manifest line ${index + 1}: need "key" and "path"`)
    }
    return { key: record.key, path: record.path }
  })
}

function parseLine(line: string, index: number): Record<string, unknown> {
  try {
    const value = JSON.parse(line)
    if (typeof value !== 'object' || value === null || Array.isArray(value)) {
      throw new Error('not an object')
    }
    return value as Record<string, unknown>
  } catch (err) {
    throw new Error(`manifest line ${index + 1}: ${(err as Error).message}`)
  }
}
