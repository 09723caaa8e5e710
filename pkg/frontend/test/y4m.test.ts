import { createHash } from 'node:crypto'
import { fileURLToPath } from 'node:url'
import { describe, expect, it } from 'vitest'

import { decodeY4m, readY4m } from '../src/y4m.js'

const SAMPLE = fileURLToPath(new URL('../sample/clip10.y4m', import.meta.url))

function monoClip(frames: number[][], width: number, height: number): Buffer {
  const parts = [Buffer.from(`YUV4MPEG2 W${width} H${height} F25:1 Cmono\n`, 'ascii')]
  for (const f of frames) {
    parts.push(Buffer.from('FRAME\n', 'ascii'), Buffer.from(f))
  }
  return Buffer.concat(parts)
}

describe('decodeY4m', () => {
  it('decodes the bundled clip: 10 frames, 64x48, exact 30/1 rate', () => {
    const video = readY4m(SAMPLE)
    expect(video.frames.length).toBe(10)
    expect(video.width).toBe(64)
    expect(video.height).toBe(48)
    expect(video.fpsNum).toBe(30)
    expect(video.fpsDen).toBe(1)
    expect(video.channels).toBe(3)
    for (const frame of video.frames) {
      expect(frame.length).toBe(64 * 48 * 3)
    }
  })

  it('is deterministic: decoding twice yields identical pixel hashes', () => {
    const digest = (frames: Uint8Array[]) => {
      const hash = createHash('sha256')
      for (const f of frames) hash.update(f)
      return hash.digest('hex')
    }
    expect(digest(readY4m(SAMPLE).frames)).toBe(digest(readY4m(SAMPLE).frames))
  })

  it('decodes mono streams to grayscale without conversion', () => {
    const pixels = [10, 20, 30, 40, 50, 60]
    const video = decodeY4m(monoClip([pixels], 3, 2))
    expect(video.channels).toBe(1)
    expect(Array.from(video.frames[0])).toEqual(pixels)
  })

  it('preserves rational frame rates from the header', () => {
    const data = Buffer.concat([
      Buffer.from('YUV4MPEG2 W2 H2 F30000:1001 Cmono\n', 'ascii'),
      Buffer.from('FRAME\n', 'ascii'),
      Buffer.from([0, 0, 0, 0]),
    ])
    const video = decodeY4m(data)
    expect(video.fpsNum).toBe(30000)
    expect(video.fpsDen).toBe(1001)
  })

  it('converts neutral-chroma 420 to pure gray RGB', () => {
    const y = Buffer.alloc(16, 77)
    const c = Buffer.alloc(4, 128)
    const data = Buffer.concat([
      Buffer.from('YUV4MPEG2 W4 H4 F1:1 C420jpeg\n', 'ascii'),
      Buffer.from('FRAME\n', 'ascii'),
      y,
      c,
      c,
    ])
    const video = decodeY4m(data)
    expect(video.frames[0].every((v) => v === 77)).toBe(true)
  })

  it('rejects non-Y4M data', () => {
    expect(() => decodeY4m(Buffer.from('RIFF....webm junk\n'))).toThrow(/not a Y4M/)
  })

  it('rejects truncated frame payloads', () => {
    const data = Buffer.concat([
      Buffer.from('YUV4MPEG2 W4 H4 F1:1 Cmono\n', 'ascii'),
      Buffer.from('FRAME\n', 'ascii'),
      Buffer.alloc(7), // needs 16
    ])
    expect(() => decodeY4m(data)).toThrow(/truncated/)
  })

  it('rejects odd dimensions for 420 chroma', () => {
    const data = Buffer.from('YUV4MPEG2 W5 H4 F1:1 C420\n', 'ascii')
    expect(() => decodeY4m(data)).toThrow(/even dimensions/)
  })

  it('rejects unsupported colorspaces', () => {
    const data = Buffer.from('YUV4MPEG2 W4 H4 F1:1 C444\n', 'ascii')
    expect(() => decodeY4m(data)).toThrow(/unsupported/)
  })

  it('rejects a header without a frame rate', () => {
    const data = Buffer.from('YUV4MPEG2 W4 H4 Cmono\n', 'ascii')
    expect(() => decodeY4m(data)).toThrow(/bad F rate/)
  })
})
