// Basic account page with ad banners: how many appear and the tracking
// attribute each one carries change on every load, so the page structure
// itself is nondeterministic.
(() => {
  interface ApiData {
    user: { name: string; email: string; role: string; last_login: string };
    account: { balance: number; currency: string; iban: string };
    features: string[];
    build: string;
  }

  function adBanners(): string {
    const count = 1 + Math.floor(Math.random() * 5);
    let banners = "";
    for (let i = 0; i < count; i++) {
      const tracker = `${Date.now().toString(36)}${Math.random()
        .toString(36)
        .slice(2, 8)}`;
      banners += `<p class="ad" data-promo-${tracker}="1">limited offer</p>`;
    }
    return banners;
  }

  async function boot(): Promise<void> {
    const reply = await fetch("/api/data");
    const data: ApiData = await reply.json();
    const features = data.features.map((f) => `<li>${f}</li>`).join("");
    const root = document.getElementById("root")!;
    root.innerHTML = [
      '<div id="main">',
      adBanners(),
      `<h1>${data.user.name}</h1>`,
      `<p class="balance">${data.account.balance} ${data.account.currency}</p>`,
      `<ul class="features">${features}</ul>`,
      "</div>",
    ].join("");
  }

  boot().catch((err) => reportError(err));
})();
