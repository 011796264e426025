import * as tf from '@tensorflow/tfjs'
import * as fs from 'node:fs'
import * as path from 'node:path'
import { PNG } from 'pngjs'

import { saveModel } from '../src/modelio.js'

/**
 * Fixed 2-layer toy classifier on 2x2 grayscale images: flatten ->
 * dense(8, linear) -> dense(3, linear). All weights are small multiples of
 * 1/16, exactly representable in float32, so the forward pass is a plain
 * affine map that can be recomputed by hand.
 */
export interface ToyWeights {
  w1: number[][] // [4][8]
  b1: number[] // [8]
  w2: number[][] // [8][3]
  b2: number[] // [3]
}

export function toyWeights(): ToyWeights {
  const w1 = Array.from({ length: 4 }, (_, i) =>
    Array.from({ length: 8 }, (_, j) => ((i + 1) * (j + 1)) / 16 - 0.5),
  )
  const b1 = Array.from({ length: 8 }, (_, j) => j / 8)
  const w2 = Array.from({ length: 8 }, (_, i) =>
    Array.from({ length: 3 }, (_, j) => (i - 2 * j) / 16),
  )
  const b2 = [0.25, -0.5, 0.125]
  return { w1, b1, w2, b2 }
}

export async function buildToyModel(dir: string): Promise<ToyWeights> {
  const weights = toyWeights()
  const model = tf.sequential()
  model.add(tf.layers.flatten({ inputShape: [2, 2, 1] }))
  model.add(tf.layers.dense({ units: 8, activation: 'linear' }))
  model.add(tf.layers.dense({ units: 3, activation: 'linear' }))
  model.layers[1].setWeights([tf.tensor2d(weights.w1), tf.tensor1d(weights.b1)])
  model.layers[2].setWeights([tf.tensor2d(weights.w2), tf.tensor1d(weights.b2)])
  await saveModel(model, dir)
  return weights
}

/** Hand-computed forward pass on the 4 flattened pixel values in [0, 1]. */
export function toyForward(pixels: number[], weights: ToyWeights): {
  features: number[]
  logits: number[]
} {
  const features = weights.b1.map((b, j) =>
    pixels.reduce((acc, p, i) => acc + p * weights.w1[i][j], b),
  )
  const logits = weights.b2.map((b, j) =>
    features.reduce((acc, f, i) => acc + f * weights.w2[i][j], b),
  )
  return { features, logits }
}

/** 2x2 grayscale PNG; `values` are 4 byte intensities, row-major. */
export function writePng(file: string, values: number[], size = 2): void {
  const png = new PNG({ width: size, height: size })
  for (let i = 0; i < size * size; i++) {
    const v = values[i % values.length]
    png.data[4 * i] = v
    png.data[4 * i + 1] = v
    png.data[4 * i + 2] = v
    png.data[4 * i + 3] = 255
  }
  fs.writeFileSync(file, PNG.sync.write(png))
}

export function readCsv(file: string): { header: string[]; rows: string[][] } {
  const lines = fs.readFileSync(file, 'utf-8').trimEnd().split('\n')
  return {
    header: lines[0].split(','),
    rows: lines.slice(1).map((l) => l.split(',')),
  }
}

export function mkdirs(...dirs: string[]): void {
  for (const d of dirs) fs.mkdirSync(d, { recursive: true })
}

export function tmpDir(name: string): string {
  const dir = path.join('/tmp', 'ood-export-tests', `${name}-${process.pid}`)
  fs.rmSync(dir, { recursive: true, force: true })
  fs.mkdirSync(dir, { recursive: true })
  return dir
}
