export type InterchangeDetection = {
  readonly frame: number
  readonly classId: number
  readonly confidence: number
  readonly x: number
  readonly y: number
  readonly w: number
  readonly h: number
  readonly embedding?: Float64Array
}

/**
 * Serialize detections in the pipeline's interchange text format:
 * two header comments, then `frame class conf x y w h [embedding...]`
 * rows sorted by frame ascending and confidence descending. Embeddings
 * follow the all-or-none rule: either every row carries embeddingDim
 * components or embeddingDim is 0 and none does.
 */
export function serializeDetections(
  detections: readonly InterchangeDetection[],
  numClasses: number,
  embeddingDim: number,
): string {
  const rows = [...detections].sort((a, b) =>
    a.frame !== b.frame ? a.frame - b.frame : b.confidence - a.confidence,
  )
  const lines = [`# num_classes=${numClasses}`, `# embedding_dim=${embeddingDim}`]
  for (const d of rows) {
    if (d.classId < 1 || d.classId > numClasses) {
      throw new Error(`class ${d.classId} outside 1..${numClasses}`)
    }
    const dim = d.embedding ? d.embedding.length : 0
    if (dim !== embeddingDim) {
      throw new Error(`row with ${dim}-dim embedding in a ${embeddingDim}-dim stream`)
    }
    const fields = [
      String(d.frame),
      String(d.classId),
      d.confidence.toFixed(4),
      d.x.toFixed(2),
      d.y.toFixed(2),
      d.w.toFixed(2),
      d.h.toFixed(2),
    ]
    if (d.embedding) {
      for (const v of d.embedding) fields.push(v.toFixed(6))
    }
    lines.push(fields.join(' '))
  }
  return lines.join('\n') + '\n'
}
