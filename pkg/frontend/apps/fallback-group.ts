// Daily deals page: the promo line only says "no offers today" when the
// offers group is empty.  No individual offer is ever rendered, so each
// offer field alone is invisible, but the group as a whole is not.
(() => {
  interface ApiData {
    title: string;
    offers: Record<string, string>;
    support: { email: string };
  }

  async function boot(): Promise<void> {
    const reply = await fetch("/api/data");
    const data: ApiData = await reply.json();
    const hasOffers = data.offers && Object.keys(data.offers).length > 0;
    const promo = hasOffers ? "offers inside - check the deals tab" : "no offers today";
    const root = document.getElementById("root")!;
    root.innerHTML = [
      '<div id="main">',
      `<h1>${data.title}</h1>`,
      `<p class="promo">${promo}</p>`,
      "</div>",
    ].join("");
  }

  boot().catch((err) => reportError(err));
})();
