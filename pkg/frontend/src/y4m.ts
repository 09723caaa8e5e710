import { readFileSync } from 'node:fs'

export type Y4mVideo = {
  readonly width: number
  readonly height: number
  readonly fpsNum: number
  readonly fpsDen: number
  readonly colorspace: string
  /** Decoded frames; grayscale (1 byte/px) for mono input, RGB otherwise. */
  readonly frames: Uint8Array[]
  readonly channels: 1 | 3
}

const MAGIC = 'YUV4MPEG2'

function clamp255(v: number): number {
  return v < 0 ? 0 : v > 255 ? 255 : Math.round(v)
}

/** Full-range BT.601 YCbCr to RGB, one pixel. */
function ycbcrToRgb(y: number, cb: number, cr: number): [number, number, number] {
  return [
    clamp255(y + 1.402 * (cr - 128)),
    clamp255(y - 0.344136 * (cb - 128) - 0.714136 * (cr - 128)),
    clamp255(y + 1.772 * (cb - 128)),
  ]
}

/**
 * Decode an uncompressed Y4M stream. Supports C420 family (chroma
 * replicated 2x2 on upsample) and Cmono. Anything compressed or
 * otherwise exotic is rejected with a clear error.
 */
export function decodeY4m(data: Buffer): Y4mVideo {
  const headerEnd = data.indexOf(0x0a)
  if (headerEnd < 0) throw new Error('not a Y4M stream: missing header terminator')
  const header = data.subarray(0, headerEnd).toString('ascii')
  const tokens = header.split(' ')
  if (tokens[0] !== MAGIC) {
    throw new Error(`not a Y4M stream: magic ${JSON.stringify(tokens[0])}`)
  }

  let width = 0
  let height = 0
  let fpsNum = 0
  let fpsDen = 0
  let colorspace = 'C420jpeg'
  for (const token of tokens.slice(1)) {
    if (!token) continue
    const tag = token[0]
    const rest = token.slice(1)
    if (tag === 'W') width = Number(rest)
    else if (tag === 'H') height = Number(rest)
    else if (tag === 'F') {
      const [n, d] = rest.split(':')
      fpsNum = Number(n)
      fpsDen = Number(d)
    } else if (tag === 'C') colorspace = token
    // Ip/A/X parameters do not affect decoding
  }
  if (!Number.isInteger(width) || width < 1 || !Number.isInteger(height) || height < 1) {
    throw new Error(`corrupt Y4M header: bad dimensions W${width} H${height}`)
  }
  if (!Number.isInteger(fpsNum) || fpsNum < 1 || !Number.isInteger(fpsDen) || fpsDen < 1) {
    throw new Error('corrupt Y4M header: missing or bad F rate')
  }

  const mono = colorspace === 'Cmono'
  const is420 = colorspace.startsWith('C420')
  if (!mono && !is420) {
    throw new Error(`unsupported Y4M colorspace ${colorspace}`)
  }
  if (is420 && (width % 2 !== 0 || height % 2 !== 0)) {
    throw new Error(`C420 requires even dimensions, got ${width}x${height}`)
  }

  const ySize = width * height
  const cSize = is420 ? (width / 2) * (height / 2) : 0
  const frameBytes = ySize + 2 * cSize
  const frames: Uint8Array[] = []
  let pos = headerEnd + 1
  while (pos < data.length) {
    const markerEnd = data.indexOf(0x0a, pos)
    if (markerEnd < 0) throw new Error('corrupt Y4M stream: unterminated FRAME marker')
    const marker = data.subarray(pos, markerEnd).toString('ascii')
    if (marker !== 'FRAME' && !marker.startsWith('FRAME ')) {
      throw new Error(`corrupt Y4M stream: expected FRAME marker, got ${JSON.stringify(marker)}`)
    }
    pos = markerEnd + 1
    if (pos + frameBytes > data.length) {
      throw new Error('corrupt Y4M stream: truncated frame payload')
    }
    const payload = data.subarray(pos, pos + frameBytes)
    pos += frameBytes
    if (mono) {
      frames.push(Uint8Array.from(payload))
      continue
    }
    const yPlane = payload.subarray(0, ySize)
    const cbPlane = payload.subarray(ySize, ySize + cSize)
    const crPlane = payload.subarray(ySize + cSize)
    const rgb = new Uint8Array(ySize * 3)
    const halfW = width / 2
    for (let row = 0; row < height; row++) {
      for (let col = 0; col < width; col++) {
        const ci = (row >> 1) * halfW + (col >> 1)
        const [r, g, b] = ycbcrToRgb(yPlane[row * width + col], cbPlane[ci], crPlane[ci])
        const o = (row * width + col) * 3
        rgb[o] = r
        rgb[o + 1] = g
        rgb[o + 2] = b
      }
    }
    frames.push(rgb)
  }

  return { width, height, fpsNum, fpsDen, colorspace, frames, channels: mono ? 1 : 3 }
}

export function readY4m(path: string): Y4mVideo {
  let data: Buffer
  try {
    data = readFileSync(path)
  } catch (err) {
    throw new Error(`cannot read video ${path}: ${(err as Error).message}`)
  }
  return decodeY4m(data)
}
