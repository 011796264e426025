/**
 * File-system IO handlers for tfjs layers models.
 *
 * The browser build of tfjs that runs under plain Node has no `file://`
 * scheme, so loading and saving a model directory (model.json plus weight
 * shards) goes through these custom handlers.
 */
import * as tf from '@tensorflow/tfjs'
import * as fs from 'node:fs'
import * as path from 'node:path'

interface WeightsManifestGroup {
  paths: string[]
  weights: tf.io.WeightsManifestEntry[]
}

function toArrayBuffer(buf: Buffer): ArrayBuffer {
  const out = new ArrayBuffer(buf.byteLength)
  new Uint8Array(out).set(buf)
  return out
}

export function fileLoadHandler(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const dir = path.dirname(modelJsonPath)
      const modelJson = JSON.parse(fs.readFileSync(modelJsonPath, 'utf-8'))
      const manifest = (modelJson.weightsManifest ?? []) as WeightsManifestGroup[]
      const weightSpecs: tf.io.WeightsManifestEntry[] = []
      const shards: Buffer[] = []
      for (const group of manifest) {
        weightSpecs.push(...group.weights)
        for (const shard of group.paths) {
          shards.push(fs.readFileSync(path.join(dir, shard)))
        }
      }
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
        weightSpecs,
        weightData: toArrayBuffer(Buffer.concat(shards)),
      }
    },
  }
}

export function fileSaveHandler(dir: string): tf.io.IOHandler {
  return {
    save: async (artifacts: tf.io.ModelArtifacts) => {
      fs.mkdirSync(dir, { recursive: true })
      const weightData = artifacts.weightData as ArrayBuffer
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData))
      const modelJson = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy,
        weightsManifest: [
          { paths: ['weights.bin'], weights: artifacts.weightSpecs },
        ],
      }
      fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON' as const,
        },
      }
    },
  }
}

/**
 * Load a layers model from a URL (public model zoo) or a local path: either
 * the model.json file itself or the directory containing it.
 */
export async function loadModel(spec: string): Promise<tf.LayersModel> {
  if (spec.startsWith('http://') || spec.startsWith('https://')) {
    return tf.loadLayersModel(spec)
  }
  let jsonPath = spec
  if (fs.existsSync(spec) && fs.statSync(spec).isDirectory()) {
    jsonPath = path.join(spec, 'model.json')
  }
  if (!fs.existsSync(jsonPath)) {
    throw new Error(`model not found: ${spec}`)
  }
  return tf.loadLayersModel(fileLoadHandler(jsonPath))
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  await model.save(fileSaveHandler(dir))
}
