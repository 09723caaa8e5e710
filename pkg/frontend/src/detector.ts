export type BlobParams = {
  /** absolute grayscale difference from background that marks foreground */
  readonly diffThreshold: number
  /** components smaller than this many pixels are noise */
  readonly minArea: number
}

/**
 * Built-in detector profiles selected by the --weights identifier. The
 * adapter deliberately ships no neural network: any detector that emits
 * the interchange format satisfies the pipeline contract, and a
 * background-difference blob detector keeps the package self-contained.
 */
export const WEIGHTS_REGISTRY: Record<string, BlobParams> = {
  'blob-median': { diffThreshold: 25, minArea: 9 },
  'blob-median-sensitive': { diffThreshold: 12, minArea: 4 },
}

export function loadWeights(identifier: string): BlobParams {
  const params = WEIGHTS_REGISTRY[identifier]
  if (!params) {
    const known = Object.keys(WEIGHTS_REGISTRY).join(', ')
    throw new Error(`cannot load detector weights ${JSON.stringify(identifier)}; known: ${known}`)
  }
  return params
}

export type RawDetection = {
  readonly frame: number
  /** detector-native class id, remapped later via the mapping file */
  readonly classId: number
  readonly confidence: number
  readonly x: number
  readonly y: number
  readonly w: number
  readonly h: number
  /** row-major grayscale pixels of the box, for the optional embedder */
  readonly patch: Uint8Array
}

/** Same integer luma weights the pipeline uses for RGB frames. */
export function toGray(pixels: Uint8Array, width: number, height: number, channels: 1 | 3): Uint8Array {
  if (channels === 1) return pixels
  const gray = new Uint8Array(width * height)
  for (let i = 0; i < gray.length; i++) {
    const o = i * 3
    gray[i] = Math.floor((299 * pixels[o] + 587 * pixels[o + 1] + 114 * pixels[o + 2] + 500) / 1000)
  }
  return gray
}

/** Per-pixel temporal median; even counts keep the lower middle value. */
export function medianBackground(frames: Uint8Array[], size: number): Uint8Array {
  if (frames.length === 0) throw new Error('cannot estimate background from zero frames')
  const n = frames.length
  const bg = new Uint8Array(size)
  const column = new Uint8Array(n)
  for (let px = 0; px < size; px++) {
    for (let f = 0; f < n; f++) column[f] = frames[f][px]
    column.sort()
    bg[px] = column[(n - 1) >> 1]
  }
  return bg
}

type Component = {
  area: number
  x0: number
  y0: number
  x1: number
  y1: number
  diffSum: number
}

/**
 * Threshold |frame - background|, take 4-connected components, and emit
 * one detection per component of at least minArea pixels. Confidence is
 * the component's mean difference scaled to [0, 1]. Components are
 * disjoint by construction so no NMS is needed here.
 */
export function detectFrame(
  gray: Uint8Array,
  background: Uint8Array,
  width: number,
  height: number,
  frame: number,
  params: BlobParams,
): RawDetection[] {
  const size = width * height
  const fg = new Uint8Array(size)
  const diff = new Uint8Array(size)
  for (let i = 0; i < size; i++) {
    const d = Math.abs(gray[i] - background[i])
    diff[i] = d
    if (d >= params.diffThreshold) fg[i] = 1
  }

  const labels = new Int32Array(size)
  const queue = new Int32Array(size)
  const components: Component[] = []
  for (let start = 0; start < size; start++) {
    if (fg[start] === 0 || labels[start] !== 0) continue
    const label = components.length + 1
    const comp: Component = {
      area: 0,
      x0: width,
      y0: height,
      x1: -1,
      y1: -1,
      diffSum: 0,
    }
    let head = 0
    let tail = 0
    queue[tail++] = start
    labels[start] = label
    while (head < tail) {
      const idx = queue[head++]
      const y = (idx / width) | 0
      const x = idx - y * width
      comp.area += 1
      comp.diffSum += diff[idx]
      if (x < comp.x0) comp.x0 = x
      if (y < comp.y0) comp.y0 = y
      if (x > comp.x1) comp.x1 = x
      if (y > comp.y1) comp.y1 = y
      if (x > 0 && fg[idx - 1] && labels[idx - 1] === 0) {
        labels[idx - 1] = label
        queue[tail++] = idx - 1
      }
      if (x + 1 < width && fg[idx + 1] && labels[idx + 1] === 0) {
        labels[idx + 1] = label
        queue[tail++] = idx + 1
      }
      if (y > 0 && fg[idx - width] && labels[idx - width] === 0) {
        labels[idx - width] = label
        queue[tail++] = idx - width
      }
      if (y + 1 < height && fg[idx + width] && labels[idx + width] === 0) {
        labels[idx + width] = label
        queue[tail++] = idx + width
      }
    }
    components.push(comp)
  }

  const out: RawDetection[] = []
  for (const comp of components) {
    if (comp.area < params.minArea) continue
    const w = comp.x1 - comp.x0 + 1
    const h = comp.y1 - comp.y0 + 1
    const patch = new Uint8Array(w * h)
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        patch[y * w + x] = gray[(comp.y0 + y) * width + (comp.x0 + x)]
      }
    }
    const confidence = Math.min(1, comp.diffSum / comp.area / 255)
    out.push({
      frame,
      classId: 0,
      confidence,
      x: comp.x0,
      y: comp.y0,
      w,
      h,
      patch,
    })
  }
  return out
}
