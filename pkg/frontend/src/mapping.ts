import { readFileSync } from 'node:fs'

export type ClassMapping = ReadonlyMap<number, number>

/**
 * Parse a `detector_class=pipeline_class` mapping file. Blank lines and
 * `#` comments are ignored. Pipeline classes must be positive; the
 * mapping is never inferred, so an unmapped detector class later aborts
 * the export.
 */
export function parseMapping(text: string): ClassMapping {
  const mapping = new Map<number, number>()
  const lines = text.split('\n')
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim()
    if (!line || line.startsWith('#')) continue
    const eq = line.indexOf('=')
    if (eq < 0) throw new Error(`mapping line ${i + 1}: expected detector=pipeline, got ${JSON.stringify(line)}`)
    const from = Number(line.slice(0, eq).trim())
    const to = Number(line.slice(eq + 1).trim())
    if (!Number.isInteger(from) || from < 0) {
      throw new Error(`mapping line ${i + 1}: bad detector class ${JSON.stringify(line.slice(0, eq))}`)
    }
    if (!Number.isInteger(to) || to < 1) {
      throw new Error(`mapping line ${i + 1}: pipeline class must be a positive integer`)
    }
    if (mapping.has(from)) throw new Error(`mapping line ${i + 1}: duplicate detector class ${from}`)
    mapping.set(from, to)
  }
  if (mapping.size === 0) throw new Error('mapping file maps no classes')
  return mapping
}

export function readMapping(path: string): ClassMapping {
  let text: string
  try {
    text = readFileSync(path, 'utf8')
  } catch (err) {
    throw new Error(`cannot read mapping ${path}: ${(err as Error).message}`)
  }
  return parseMapping(text)
}

/** Smallest N such that every mapped pipeline class is in 1..N. */
export function numClasses(mapping: ClassMapping): number {
  let max = 0
  for (const to of mapping.values()) max = Math.max(max, to)
  return max
}
