import { mkdirSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

export type SequenceMeta = {
  readonly fpsNum: number
  readonly fpsDen: number
  readonly width: number
  readonly height: number
  readonly frameCount: number
  readonly channels: 1 | 3
}

/**
 * Write one frame as binary PGM (grayscale, P5) or PPM (RGB, P6),
 * maxval 255. `pixels` is row-major, `width * height * channels` bytes.
 */
export function writePnm(
  path: string,
  pixels: Uint8Array,
  width: number,
  height: number,
  channels: 1 | 3,
): void {
  const expected = width * height * channels
  if (pixels.length !== expected) {
    throw new Error(`pixel buffer has ${pixels.length} bytes, expected ${expected}`)
  }
  const magic = channels === 1 ? 'P5' : 'P6'
  const header = Buffer.from(`${magic}\n${width} ${height}\n255\n`, 'ascii')
  writeFileSync(path, Buffer.concat([header, Buffer.from(pixels)]))
}

/** Write the key=value sidecar; fps is always an exact rational. */
export function writeMeta(dir: string, meta: SequenceMeta): void {
  const lines = [
    `fps=${meta.fpsNum}/${meta.fpsDen}`,
    `width=${meta.width}`,
    `height=${meta.height}`,
    `frame_count=${meta.frameCount}`,
    `channels=${meta.channels}`,
  ]
  writeFileSync(join(dir, 'sequence.meta'), lines.join('\n') + '\n', 'utf8')
}

export function frameName(index: number, channels: 1 | 3): string {
  const ext = channels === 1 ? 'pgm' : 'ppm'
  return `frame_${String(index).padStart(6, '0')}.${ext}`
}

/**
 * Write a full sequence directory: every frame plus the sidecar.
 * Returns the list of frame file names in order.
 */
export function writeSequence(
  dir: string,
  meta: SequenceMeta,
  frames: Iterable<Uint8Array>,
): string[] {
  mkdirSync(dir, { recursive: true })
  const names: string[] = []
  let index = 0
  for (const pixels of frames) {
    const name = frameName(index, meta.channels)
    writePnm(join(dir, name), pixels, meta.width, meta.height, meta.channels)
    names.push(name)
    index += 1
  }
  if (index !== meta.frameCount) {
    throw new Error(`wrote ${index} frames, meta says ${meta.frameCount}`)
  }
  writeMeta(dir, meta)
  return names
}
