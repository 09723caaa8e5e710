export type Embedder = {
  readonly dim: number
  embed(patch: Uint8Array): Float64Array
}

/**
 * 64-bin grayscale intensity histogram of the box, L2-normalized. A
 * crude appearance signature, but it is stable for rigid items under a
 * fixed camera and satisfies the unit-norm embedding contract.
 */
function grayHist64(patch: Uint8Array): Float64Array {
  const hist = new Float64Array(64)
  for (let i = 0; i < patch.length; i++) {
    hist[patch[i] >> 2] += 1
  }
  let sq = 0
  for (let i = 0; i < 64; i++) sq += hist[i] * hist[i]
  const norm = Math.sqrt(sq)
  if (norm > 0) {
    for (let i = 0; i < 64; i++) hist[i] /= norm
  } else {
    hist[0] = 1 // empty patch degenerates to a fixed unit vector
  }
  return hist
}

export const EMBEDDER_REGISTRY: Record<string, Embedder> = {
  'gray-hist-64': { dim: 64, embed: grayHist64 },
}

export function loadEmbedder(identifier: string): Embedder {
  const embedder = EMBEDDER_REGISTRY[identifier]
  if (!embedder) {
    const known = Object.keys(EMBEDDER_REGISTRY).join(', ')
    throw new Error(`cannot load embedder ${JSON.stringify(identifier)}; known: ${known}`)
  }
  return embedder
}
