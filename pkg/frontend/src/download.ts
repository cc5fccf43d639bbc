// Browser file download via a temporary object-URL anchor.

import type { ExportResult } from "./types";

export type DownloadHandler = (result: ExportResult) => void;

function browserDownload(result: ExportResult): void {
  const blob = new Blob([result.content], { type: result.mediaType });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = result.filename;
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}

let handler: DownloadHandler = browserDownload;

/** Tests replace the handler to capture the downloaded payload. */
export function setDownloadHandler(next: DownloadHandler): void {
  handler = next;
}

export function triggerDownload(result: ExportResult): void {
  handler(result);
}
