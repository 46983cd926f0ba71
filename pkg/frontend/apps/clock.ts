// Basic account page plus a header that shows the current date and time,
// so one text node differs on every load.
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
      `<p class="clock">as of ${new Date().toISOString()}</p>`,
      `<h1>${data.user.name}</h1>`,
      `<p class="balance">${data.account.balance} ${data.account.currency}</p>`,
      `<ul class="features">${features}</ul>`,
      "</div>",
    ].join("");
  }

  boot().catch((err) => reportError(err));
})();
