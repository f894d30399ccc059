import type { Server } from "node:http";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createServer, extractTranscript, listen } from "../src/serve.js";
import { defaultTrainConfig, train } from "../src/train.js";

const TEMPLATES = { system: "rater", cot_user: "<<<\n{{transcript}}\n>>>" };

function tunedModel() {
  const config = defaultTrainConfig({
    loraRank: 2,
    learningRate: 0.01,
    seed: 1,
    schedule: { warmupSteps: 2, sustainSteps: 10, decaySteps: 2 },
  });
  const examples = [
    { text: "um thing stuff what", label: "AD" as const },
    { text: "kitchen window garden plate", label: "non_AD" as const },
    { text: "maybe hmm forget lost", label: "AD" as const },
    { text: "curtain cupboard kettle apron", label: "non_AD" as const },
  ];
  return train(config, examples, TEMPLATES).model;
}

describe("extractTranscript", () => {
  it("reads the delimited block from the last user message", () => {
    const messages = [
      { role: "system", content: "rater" },
      { role: "user", content: "<<<\nfirst\n>>>" },
      { role: "assistant", content: "Diagnosis: AD" },
      { role: "user", content: "Transcript:\n<<<\nthe boy is falling\n>>>\nAnswer." },
    ];
    expect(extractTranscript(messages)).toBe("the boy is falling");
  });

  it("returns null when the last user message has no block", () => {
    expect(extractTranscript([{ role: "user", content: "no block" }])).toBeNull();
    expect(extractTranscript([{ role: "system", content: "<<<\nx\n>>>" }])).toBeNull();
  });
});

describe("the chat-completions endpoint", () => {
  let server: Server;
  let baseUrl: string;

  beforeAll(async () => {
    server = createServer(tunedModel(), "toy-decoder-1b");
    const port = await listen(server, 0);
    baseUrl = `http://127.0.0.1:${port}`;
  });

  afterAll(() => {
    server.close();
  });

  const request = (body: unknown) =>
    fetch(`${baseUrl}/v1/chat/completions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: typeof body === "string" ? body : JSON.stringify(body),
    });

  const bundle = (transcript: string) => ({
    model: "toy-decoder-1b",
    temperature: 0,
    max_tokens: 256,
    messages: [
      { role: "system", content: "rater" },
      { role: "user", content: `Transcript:\n<<<\n${transcript}\n>>>` },
    ],
  });

  it("answers a prompt bundle with a completion ending in a verdict line", async () => {
    const response = await request(bundle("um thing stuff what"));
    expect(response.status).toBe(200);
    const payload = await response.json();
    const content: string = payload.choices[0].message.content;
    const last = content.trim().split("\n").at(-1)!;
    expect(last).toMatch(/^Diagnosis: (AD|non-AD)$/);
    expect(payload.choices[0].finish_reason).toBe("stop");
  });

  it("is deterministic at temperature 0", async () => {
    const first = await (await request(bundle("the boy is on the stool"))).json();
    const second = await (await request(bundle("the boy is on the stool"))).json();
    expect(second).toEqual(first);
  });

  it("rejects malformed JSON without crashing", async () => {
    const response = await request("{not json");
    expect(response.status).toBe(400);
    const payload = await response.json();
    expect(payload.error.message).toMatch(/JSON/);
    // and the server still works afterwards
    expect((await request(bundle("still alive"))).status).toBe(200);
  });

  it("rejects bodies without messages or without a transcript block", async () => {
    expect((await request({ model: "m" })).status).toBe(400);
    expect(
      (await request({ messages: [{ role: "user", content: "no block" }] })).status,
    ).toBe(400);
    expect((await request({ messages: [{ role: "user", content: 5 }] })).status).toBe(400);
  });

  it("404s unknown routes", async () => {
    const response = await fetch(`${baseUrl}/v1/other`, { method: "POST", body: "{}" });
    expect(response.status).toBe(404);
  });
});
