// Basic account page that mounts part of its UI inside an open shadow
// root, which the fuzzer's DOM extraction cannot see into.
(() => {
  interface ApiData {
    user: { name: string; email: string; role: string; last_login: string };
    account: { balance: number; currency: string; iban: string };
    features: string[];
    build: string;
  }

  async function boot(): Promise<void> {
    const reply = await fetch("/api/data");
    const data: ApiData = await reply.json();
    const features = data.features.map((f) => `<li>${f}</li>`).join("");
    const root = document.getElementById("root")!;
    root.innerHTML = [
      '<div id="main">',
      `<h1>${data.user.name}</h1>`,
      `<p class="balance">${data.account.balance} ${data.account.currency}</p>`,
      `<ul class="features">${features}</ul>`,
      '<div id="shadow-widget"></div>',
      "</div>",
    ].join("");
    const host = document.getElementById("shadow-widget")!;
    const shadow = host.attachShadow({ mode: "open" });
    shadow.innerHTML = `<p>signed in as ${data.user.name}</p>`;
  }

  boot().catch((err) => reportError(err));
})();
