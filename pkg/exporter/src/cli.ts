#!/usr/bin/env node
/**
 * ood-export export --model <path|url> --data <dir> --kind {logits|features}
 *                   --out <csv> --manifest <json> [--batch N]
 *                   [--dataset-kind {id|ood}] [--name NAME]
 *                   [--mean M] [--std S] [--skip-log FILE]
 */
import { parseArgs } from 'node:util'

import { runExport, type ExportJob } from './export.js'

const USAGE = `usage: ood-export export --model <path|url> --data <dir> \\
    --kind {logits|features} --out <csv> --manifest <json> \\
    [--batch N] [--dataset-kind {id|ood}] [--name NAME] \\
    [--mean M] [--std S] [--skip-log FILE]`

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== 'export') {
    console.error(USAGE)
    return 2
  }
  let parsed
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        model: { type: 'string' },
        data: { type: 'string' },
        kind: { type: 'string', default: 'logits' },
        out: { type: 'string' },
        manifest: { type: 'string' },
        batch: { type: 'string', default: '32' },
        'dataset-kind': { type: 'string' },
        name: { type: 'string' },
        mean: { type: 'string', default: '0' },
        std: { type: 'string', default: '1' },
        'skip-log': { type: 'string' },
      },
    })
  } catch (err) {
    console.error(String(err))
    console.error(USAGE)
    return 2
  }
  const v = parsed.values
  for (const required of ['model', 'data', 'out', 'manifest'] as const) {
    if (!v[required]) {
      console.error(`missing --${required}`)
      console.error(USAGE)
      return 2
    }
  }
  if (v.kind !== 'logits' && v.kind !== 'features') {
    console.error(`--kind must be logits or features, got ${v.kind}`)
    return 2
  }
  if (v['dataset-kind'] && v['dataset-kind'] !== 'id' && v['dataset-kind'] !== 'ood') {
    console.error(`--dataset-kind must be id or ood, got ${v['dataset-kind']}`)
    return 2
  }

  const job: ExportJob = {
    model: v.model!,
    data: v.data!,
    columnKind: v.kind,
    outCsv: v.out!,
    manifestPath: v.manifest!,
    batchSize: Number(v.batch),
    datasetKind: v['dataset-kind'] as 'id' | 'ood' | undefined,
    name: v.name,
    mean: Number(v.mean),
    std: Number(v.std),
    skipLog: v['skip-log'],
  }
  try {
    const result = await runExport(job)
    console.error(
      `wrote ${result.rows} rows (${result.numColumns} columns, ` +
        `${result.skipped.length} skipped) to ${v.out}`,
    )
    return 0
  } catch (err) {
    console.error(String(err))
    return 1
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url === new URL(`file://${process.argv[1]}`).href
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
