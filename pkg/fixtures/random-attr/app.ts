// Basic account page, but the container picks a random theme class on
// every load.  The attribute value flutters; the attribute set does not.
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
    const theme = `theme-${Math.floor(Math.random() * 1_000_000_000)}`;
    const features = data.features.map((f) => `<li>${f}</li>`).join("");
    const root = document.getElementById("root")!;
    root.innerHTML = [
      `<div id="main" class="${theme}">`,
      `<h1>${data.user.name}</h1>`,
      `<p class="balance">${data.account.balance} ${data.account.currency}</p>`,
      `<ul class="features">${features}</ul>`,
      "</div>",
    ].join("");
  }

  boot().catch((err) => reportError(err));
})();
