#!/usr/bin/env node
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { decodeVideo, exportDetections, type AdapterConfig } from './adapter.js'

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName('adapter')
    .usage('$0 --video F --out DIR --weights W --conf 0.25 [--embedder E] --mapping M')
    .option('video', { type: 'string', demandOption: true, describe: 'input Y4M video file' })
    .option('out', { type: 'string', demandOption: true, describe: 'output directory' })
    .option('weights', {
      type: 'string',
      default: 'blob-median',
      describe: 'detector weights identifier',
    })
    .option('conf', { type: 'number', default: 0.25, describe: 'confidence floor' })
    .option('embedder', { type: 'string', describe: 'appearance embedder identifier' })
    .option('mapping', {
      type: 'string',
      demandOption: true,
      describe: 'detector_class=pipeline_class file',
    })
    .strict()
    .exitProcess(false)
    .help()
    .parse()

  const config: AdapterConfig = {
    video: args.video,
    outDir: args.out,
    weights: args.weights,
    confidenceFloor: args.conf,
    mappingPath: args.mapping,
    embedder: args.embedder,
  }
  try {
    const decoded = decodeVideo(config)
    const detsPath = exportDetections(config, decoded)
    console.log(`decoded ${decoded.meta.frameCount} frames to ${decoded.framesDir}`)
    console.log(`wrote ${detsPath}`)
    return 0
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

const entry = process.argv[1] ?? ''
if (entry.endsWith('cli.js') || entry.endsWith('cli.ts')) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code
  })
}
