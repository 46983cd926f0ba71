// Fixture definitions: one entry per corpus member.
//
// Each fixture is a tiny client app plus the JSON body it fetches and a
// hand-written manifest of the field paths the client actually renders
// from.  The manifest is the ground truth the fuzzer's flagged set is
// judged against: flagged must equal all leaves minus the manifest.

import { Json } from "./leaves";
import { ExchangeSpec } from "./session";

export const ORIGIN = "http://app.test";
export const API_PATH = "/api/data";

export interface FixtureSpec {
  name: string;
  title: string;
  summary: string;
  apiBody: Json;
  manifest: string[];
  waitSelector: string;
  timeoutMs: number;
  extraExchanges?: ExchangeSpec[];
}

// Shared by the fixtures whose clients render the same account page and
// differ only in their nondeterministic decoration: their flagged sets
// must all equal the basic fixture's.
const ACCOUNT_API: Json = {
  user: {
    name: "Ada Lovelace",
    email: "ada@example.test",
    role: "admin",
    last_login: "2026-08-14T21:02:11Z",
  },
  account: {
    balance: 412.5,
    currency: "USD",
    iban: "GB29NWBK60161331926819",
  },
  features: ["search", "export"],
  build: "77f1c2a",
};

const ACCOUNT_MANIFEST = [
  "user.name",
  "account.balance",
  "account.currency",
  "features[0]",
  "features[1]",
];

const STOCK_API: Json = {
  stores: [
    {
      name: "Midtown",
      latitude: "-37.8136",
      longitude: "144.9631",
      products: [
        { id: "2632206", available: 85, qty: 0, reserved: 0, order: 1 },
        { id: "1188340", available: 12, qty: 0, reserved: 3, order: 2 },
      ],
    },
    {
      name: "Harbourside",
      latitude: "-33.8688",
      longitude: "151.2093",
      products: [{ id: "2632206", available: 4, qty: 0, reserved: 1, order: 1 }],
    },
  ],
};

const STOCK_MANIFEST = [
  "stores[0].name",
  "stores[0].products[0].id",
  "stores[0].products[0].available",
  "stores[0].products[1].id",
  "stores[0].products[1].available",
  "stores[1].name",
  "stores[1].products[0].id",
  "stores[1].products[0].available",
];

const MAIN_DIV = '//div[@id="main"]';

export const FIXTURES: FixtureSpec[] = [
  {
    name: "basic",
    title: "Account overview",
    summary: "nested object; renders a strict subset of the fields",
    apiBody: ACCOUNT_API,
    manifest: ACCOUNT_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "arrays",
    title: "Stock availability",
    summary:
      "per-store/per-product stock; displays only the zero-threshold availability category",
    apiBody: STOCK_API,
    manifest: STOCK_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "random-attr",
    title: "Account overview (random theme)",
    summary: "basic page plus a class attribute randomized per load (mask exercise)",
    apiBody: ACCOUNT_API,
    manifest: ACCOUNT_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "clock",
    title: "Account overview (clock)",
    summary: "basic page plus the current date and time (mask exercise)",
    apiBody: ACCOUNT_API,
    manifest: ACCOUNT_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "banner",
    title: "Account overview (ad banners)",
    summary: "randomly inserted ad elements; structural nondeterminism, abort B",
    apiBody: ACCOUNT_API,
    manifest: ACCOUNT_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "token",
    title: "Account overview (telemetry beacon)",
    summary: "fetches a random-token beacon URL; request nondeterminism, abort F",
    apiBody: ACCOUNT_API,
    manifest: ACCOUNT_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
    extraExchanges: [
      {
        url: `${ORIGIN}/beacon?token=k2v9f1q7`,
        status: 204,
        responseHeaders: [["Cache-Control", "no-store"]],
        responseBody: Buffer.alloc(0),
      },
    ],
  },
  {
    name: "shadow",
    title: "Account overview (shadow widget)",
    summary: "attaches an open shadow root; unsupported page, abort S",
    apiBody: ACCOUNT_API,
    manifest: ACCOUNT_MANIFEST,
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "fallback-group",
    title: "Daily deals",
    summary:
      "renders a default message only when the whole offers group is absent; fails simultaneous validation",
    apiBody: {
      title: "Daily Deals",
      offers: { spring: "-10%", loyalty: "-5%" },
      support: { email: "help@example.test" },
    },
    manifest: ["title"],
    waitSelector: MAIN_DIV,
    timeoutMs: 5000,
  },
  {
    name: "sentinel",
    title: "Welcome page",
    summary:
      "the waited-for element only renders when owner.name is present (StateNotReached path)",
    apiBody: {
      owner: { name: "ada" },
      greeting: "welcome back",
      telemetry: { device: "pixel-9", ip: "10.1.2.3" },
    },
    manifest: ["owner.name", "greeting"],
    waitSelector: '//div[@id="user-info"]',
    timeoutMs: 2000,
  },
];

export function scriptConfig(fixture: FixtureSpec): string {
  return [
    `TARGET ${API_PATH}`,
    `TIMEOUT ${fixture.timeoutMs}`,
    `LOAD ${ORIGIN}/`,
    `WAIT_LOCATE ${fixture.waitSelector}`,
    "FUZZ",
    "",
  ].join("\n");
}

export function indexHtml(fixture: FixtureSpec): string {
  return [
    "<!doctype html>",
    "<html>",
    "<head>",
    '<meta charset="utf-8">',
    `<title>${fixture.title}</title>`,
    "</head>",
    "<body>",
    '<div id="root">loading</div>',
    '<script src="/app.js"></script>',
    "</body>",
    "</html>",
    "",
  ].join("\n");
}
