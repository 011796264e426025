import * as fs from 'node:fs'
import * as path from 'node:path'
import { beforeAll, describe, expect, it } from 'vitest'

import { runExport } from '../src/export.js'
import { listImages } from '../src/images.js'
import { buildToyModel, mkdirs, readCsv, tmpDir, writePng } from './helpers.js'

let root: string
let modelDir: string

beforeAll(async () => {
  root = tmpDir('export')
  modelDir = path.join(root, 'model')
  await buildToyModel(modelDir)
})

describe('labeled directories', () => {
  it('maps sorted class folders to label indices', async () => {
    const dataDir = path.join(root, 'labeled')
    mkdirs(path.join(dataDir, 'zebra'), path.join(dataDir, 'apple'))
    writePng(path.join(dataDir, 'apple', 'a0.png'), [10, 20, 30, 40])
    writePng(path.join(dataDir, 'apple', 'a1.png'), [50, 60, 70, 80])
    writePng(path.join(dataDir, 'zebra', 'z0.png'), [200, 210, 220, 230])

    const out = path.join(root, 'labeled.csv')
    const manifestPath = path.join(root, 'labeled.json')
    const result = await runExport({
      model: modelDir,
      data: dataDir,
      columnKind: 'logits',
      outCsv: out,
      manifestPath,
      name: 'fruit-vs-stripes',
    })
    expect(result.rows).toBe(3)

    const { rows } = readCsv(out)
    expect(rows.map((r) => [r[0], r[1]])).toEqual([
      ['apple/a0.png', '0'],
      ['apple/a1.png', '0'],
      ['zebra/z0.png', '1'],
    ])
    const doc = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'))
    expect(doc.kind).toBe('id')
    expect(doc.name).toBe('fruit-vs-stripes')
  })

  it('ood dataset-kind drops labels', async () => {
    const dataDir = path.join(root, 'labeled')
    const out = path.join(root, 'labeled-ood.csv')
    await runExport({
      model: modelDir,
      data: dataDir,
      columnKind: 'logits',
      outCsv: out,
      manifestPath: path.join(root, 'labeled-ood.json'),
      datasetKind: 'ood',
    })
    const { rows } = readCsv(out)
    expect(rows.every((r) => r[1] === '')).toBe(true)
  })
})

describe('skipping unreadable images', () => {
  it('records skips and keeps row + skip count equal to the input count', async () => {
    const dataDir = path.join(root, 'partial')
    mkdirs(dataDir)
    writePng(path.join(dataDir, 'good0.png'), [1, 2, 3, 4])
    writePng(path.join(dataDir, 'good1.png'), [5, 6, 7, 8])
    fs.writeFileSync(path.join(dataDir, 'broken.png'), 'not a png at all')

    const out = path.join(root, 'partial.csv')
    const skipLog = path.join(root, 'partial.skipped.txt')
    const result = await runExport({
      model: modelDir,
      data: dataDir,
      columnKind: 'logits',
      outCsv: out,
      manifestPath: path.join(root, 'partial.json'),
      skipLog,
    })
    const total = listImages(dataDir).entries.length
    expect(result.rows + result.skipped.length).toBe(total)
    expect(result.skipped).toEqual(['broken.png'])
    expect(fs.readFileSync(skipLog, 'utf-8').trim()).toBe('broken.png')
    expect(readCsv(out).rows).toHaveLength(2)
  })
})

describe('input geometry', () => {
  it('resizes larger images down to the model input', async () => {
    const dataDir = path.join(root, 'big')
    mkdirs(dataDir)
    writePng(path.join(dataDir, 'big.png'), [0, 64, 128, 255], 4)
    const out = path.join(root, 'big.csv')
    const result = await runExport({
      model: modelDir,
      data: dataDir,
      columnKind: 'logits',
      outCsv: out,
      manifestPath: path.join(root, 'big.json'),
    })
    expect(result.rows).toBe(1)
    const values = readCsv(out).rows[0].slice(2).map(Number)
    expect(values.every(Number.isFinite)).toBe(true)
  })

  it('applies mean/std normalization', async () => {
    const dataDir = path.join(root, 'norm')
    mkdirs(dataDir)
    writePng(path.join(dataDir, 'x.png'), [128, 128, 128, 128])
    const plain = path.join(root, 'norm-plain.csv')
    const normalized = path.join(root, 'norm-scaled.csv')
    await runExport({
      model: modelDir, data: dataDir, columnKind: 'logits',
      outCsv: plain, manifestPath: path.join(root, 'n1.json'),
    })
    await runExport({
      model: modelDir, data: dataDir, columnKind: 'logits',
      outCsv: normalized, manifestPath: path.join(root, 'n2.json'),
      mean: 0.5, std: 0.25,
    })
    const a = readCsv(plain).rows[0].slice(2).map(Number)
    const b = readCsv(normalized).rows[0].slice(2).map(Number)
    expect(a).not.toEqual(b)
  })
})
