import { createServer as createHttpServer, type Server } from "node:http";

import { forwardLogit, type AdaptedModel } from "./train.js";

/**
 * Serve a tuned model behind the shared chat-completions wire protocol:
 * POST /v1/chat/completions with {model, messages, temperature, max_tokens},
 * responding with a completion whose last line is the "Diagnosis: ..." verdict
 * the transcript-analysis pipeline parses. Inference is deterministic.
 */

export interface ChatMessage {
  role: string;
  content: string;
}

const TRANSCRIPT_RE = /<<<\n([\s\S]*?)\n>>>/;

/** Pull the delimited transcript out of the last user message, if any. */
export function extractTranscript(messages: ChatMessage[]): string | null {
  for (let i = messages.length - 1; i >= 0; i--) {
    const message = messages[i]!;
    if (message.role !== "user") continue;
    const match = TRANSCRIPT_RE.exec(message.content);
    return match ? match[1]! : null;
  }
  return null;
}

export function renderCompletion(model: AdaptedModel, transcript: string): string {
  const logit = forwardLogit(model, transcript);
  const label = logit > 0 ? "AD" : "non-AD";
  const confidence = Math.abs(Math.tanh(logit)).toFixed(3);
  return [
    `Classification-head score ${logit.toFixed(6)} (confidence ${confidence}).`,
    `Diagnosis: ${label}`,
  ].join("\n");
}

function errorBody(message: string): string {
  return JSON.stringify({ error: { message } });
}

export function createServer(model: AdaptedModel, servedModelId: string): Server {
  return createHttpServer((req, res) => {
    const fail = (status: number, message: string) => {
      const body = errorBody(message);
      res.writeHead(status, { "Content-Type": "application/json" });
      res.end(body);
    };
    if (req.method !== "POST" || req.url !== "/v1/chat/completions") {
      fail(404, "unknown route");
      return;
    }
    const parts: Buffer[] = [];
    req.on("data", (chunk: Buffer) => parts.push(chunk));
    req.on("end", () => {
      let payload: { messages?: ChatMessage[] };
      try {
        payload = JSON.parse(Buffer.concat(parts).toString("utf8"));
      } catch {
        fail(400, "request body is not valid JSON");
        return;
      }
      if (!Array.isArray(payload.messages) || payload.messages.length === 0) {
        fail(400, "messages must be a non-empty array");
        return;
      }
      if (payload.messages.some((m) => typeof m?.role !== "string" || typeof m?.content !== "string")) {
        fail(400, "each message needs string role and content");
        return;
      }
      const transcript = extractTranscript(payload.messages);
      if (transcript === null) {
        fail(400, "no <<< ... >>> transcript block in the last user message");
        return;
      }
      const content = renderCompletion(model, transcript);
      const body = JSON.stringify({
        model: servedModelId,
        choices: [
          {
            index: 0,
            message: { role: "assistant", content },
            finish_reason: "stop",
          },
        ],
      });
      res.writeHead(200, { "Content-Type": "application/json" });
      res.end(body);
    });
  });
}

export function listen(server: Server, port: number): Promise<number> {
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(port, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") resolve(address.port);
      else reject(new Error("server has no bound port"));
    });
  });
}
