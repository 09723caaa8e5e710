import { mkdirSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

import { detectFrame, loadWeights, medianBackground, toGray, type RawDetection } from './detector.js'
import { loadEmbedder, type Embedder } from './embedder.js'
import { serializeDetections, type InterchangeDetection } from './interchange.js'
import { numClasses, readMapping, type ClassMapping } from './mapping.js'
import { writeSequence, type SequenceMeta } from './pnm.js'
import { readY4m, type Y4mVideo } from './y4m.js'

export type AdapterConfig = {
  readonly video: string
  readonly outDir: string
  readonly weights: string
  readonly confidenceFloor: number
  readonly mappingPath: string
  readonly embedder?: string
}

export function validateConfig(config: AdapterConfig): void {
  if (!(config.confidenceFloor >= 0 && config.confidenceFloor <= 1)) {
    throw new Error(`confidence floor must be in [0, 1], got ${config.confidenceFloor}`)
  }
}

export type DecodeResult = {
  readonly framesDir: string
  readonly meta: SequenceMeta
  readonly video: Y4mVideo
}

/**
 * Decode the video into the pipeline's frame-sequence layout:
 * `<out>/frames/frame_NNNNNN.pgm|ppm` plus `sequence.meta` with the
 * container's frame rate preserved as an exact rational.
 */
export function decodeVideo(config: AdapterConfig): DecodeResult {
  validateConfig(config)
  const video = readY4m(config.video)
  if (video.frames.length === 0) {
    throw new Error(`video ${config.video} contains no frames`)
  }
  const meta: SequenceMeta = {
    fpsNum: video.fpsNum,
    fpsDen: video.fpsDen,
    width: video.width,
    height: video.height,
    frameCount: video.frames.length,
    channels: video.channels,
  }
  const framesDir = join(config.outDir, 'frames')
  mkdirSync(framesDir, { recursive: true })
  writeSequence(framesDir, meta, video.frames)
  return { framesDir, meta, video }
}

function remap(raw: RawDetection, mapping: ClassMapping, embedder?: Embedder): InterchangeDetection {
  const mapped = mapping.get(raw.classId)
  if (mapped === undefined) {
    throw new Error(`mapping gap: detector class ${raw.classId} has no pipeline class`)
  }
  return {
    frame: raw.frame,
    classId: mapped,
    confidence: raw.confidence,
    x: raw.x,
    y: raw.y,
    w: raw.w,
    h: raw.h,
    embedding: embedder ? embedder.embed(raw.patch) : undefined,
  }
}

/**
 * Run the configured detector over decoded frames and write
 * `<out>/dets.txt` in the interchange format. Detections below the
 * confidence floor are dropped before remapping.
 */
export function exportDetections(config: AdapterConfig, decoded: DecodeResult): string {
  validateConfig(config)
  const params = loadWeights(config.weights)
  const embedder = config.embedder ? loadEmbedder(config.embedder) : undefined
  const mapping = readMapping(config.mappingPath)

  const { width, height, channels } = decoded.video
  const grays = decoded.video.frames.map((f) => toGray(f, width, height, channels))
  const background = medianBackground(grays, width * height)

  const out: InterchangeDetection[] = []
  for (let frame = 0; frame < grays.length; frame++) {
    for (const raw of detectFrame(grays[frame], background, width, height, frame, params)) {
      if (raw.confidence < config.confidenceFloor) continue
      out.push(remap(raw, mapping, embedder))
    }
  }

  const text = serializeDetections(out, numClasses(mapping), embedder ? embedder.dim : 0)
  const detsPath = join(config.outDir, 'dets.txt')
  mkdirSync(config.outDir, { recursive: true })
  writeFileSync(detsPath, text, 'utf8')
  return detsPath
}
