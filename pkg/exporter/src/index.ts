export { runExport, featureModel, type ExportJob, type ExportResult } from './export.js'
export { listImages, decodeImage, type ImageEntry, type ImageListing } from './images.js'
export { loadModel, saveModel, fileLoadHandler, fileSaveHandler } from './modelio.js'
export { CsvWriter, writeManifest, formatRow, type Manifest } from './csv.js'
