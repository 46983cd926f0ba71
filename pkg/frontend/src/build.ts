// Corpus builder: emits every fixture as a self-contained directory of
// static assets plus a pre-recorded session archive.
//
// Usage: node dist/build.js [output-dir]   (default: ../fixtures)

import * as fs from "node:fs";
import * as path from "node:path";
import * as ts from "typescript";

import { API_PATH, FIXTURES, FixtureSpec, ORIGIN, indexHtml, scriptConfig } from "./corpus";
import { enumerateLeafPaths } from "./leaves";
import { ExchangeSpec, sessionArchive } from "./session";

const FRONTEND_ROOT = path.resolve(__dirname, "..");
const DEFAULT_OUT = path.resolve(FRONTEND_ROOT, "..", "fixtures");

function transpileApp(source: string): string {
  const result = ts.transpileModule(source, {
    compilerOptions: {
      target: ts.ScriptTarget.ES2020,
      module: ts.ModuleKind.None,
    },
  });
  return result.outputText;
}

function checkManifest(fixture: FixtureSpec): void {
  const leaves = new Set(enumerateLeafPaths(fixture.apiBody));
  const seen = new Set<string>();
  for (const entry of fixture.manifest) {
    if (!leaves.has(entry)) {
      throw new Error(`${fixture.name}: manifest path ${entry} is not a leaf of api.json`);
    }
    if (seen.has(entry)) {
      throw new Error(`${fixture.name}: manifest lists ${entry} twice`);
    }
    seen.add(entry);
  }
}

export function buildFixture(fixture: FixtureSpec, outDir: string): void {
  checkManifest(fixture);

  const appSource = fs.readFileSync(
    path.join(FRONTEND_ROOT, "apps", `${fixture.name}.ts`),
    "utf-8"
  );
  const appJs = transpileApp(appSource);
  const html = indexHtml(fixture);
  const apiBytes = `${JSON.stringify(fixture.apiBody, null, 2)}\n`;

  const exchanges: ExchangeSpec[] = [
    {
      url: `${ORIGIN}/`,
      responseHeaders: [["Content-Type", "text/html; charset=utf-8"]],
      responseBody: Buffer.from(html),
    },
    {
      url: `${ORIGIN}/app.js`,
      responseHeaders: [["Content-Type", "application/javascript"]],
      responseBody: Buffer.from(appJs),
    },
    ...(fixture.extraExchanges ?? []),
    {
      url: `${ORIGIN}${API_PATH}`,
      responseHeaders: [["Content-Type", "application/json"]],
      responseBody: Buffer.from(apiBytes),
    },
  ];

  const dir = path.join(outDir, fixture.name);
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(path.join(dir, "index.html"), html);
  fs.writeFileSync(path.join(dir, "app.ts"), appSource);
  fs.writeFileSync(path.join(dir, "app.js"), appJs);
  fs.writeFileSync(path.join(dir, "api.json"), apiBytes);
  fs.writeFileSync(
    path.join(dir, "manifest.json"),
    `${JSON.stringify(fixture.manifest, null, 2)}\n`
  );
  fs.writeFileSync(path.join(dir, "script.cfg"), scriptConfig(fixture));
  fs.writeFileSync(
    path.join(dir, "session.json"),
    sessionArchive({
      exchanges,
      targetIndex: exchanges.length - 1,
      notes: `${fixture.name}: ${fixture.summary}`,
    })
  );
}

export function buildCorpus(outDir: string): void {
  for (const fixture of FIXTURES) {
    buildFixture(fixture, outDir);
  }
}

if (require.main === module) {
  const outDir = process.argv[2] ? path.resolve(process.argv[2]) : DEFAULT_OUT;
  buildCorpus(outDir);
  console.log(`built ${FIXTURES.length} fixtures in ${outDir}`);
}
