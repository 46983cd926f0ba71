// Stock availability: per store, list each product as "available" or
// "unavailable".  The exact stock counts never reach the page.
(() => {
  interface Product {
    id: string;
    available: number;
    qty: number;
    reserved: number;
    order: number;
  }

  interface Store {
    name: string;
    latitude: string;
    longitude: string;
    products: Product[];
  }

  function categorize(product: Product): string {
    return product.available > 0 ? "available" : "unavailable";
  }

  async function boot(): Promise<void> {
    const reply = await fetch("/api/data");
    const data: { stores: Store[] } = await reply.json();
    const sections = data.stores.map((store) => {
      const rows = store.products
        .map((p) => `<li>item ${p.id}: ${categorize(p)}</li>`)
        .join("");
      return `<section><h2>${store.name}</h2><ul>${rows}</ul></section>`;
    });
    const root = document.getElementById("root")!;
    root.innerHTML = `<div id="main">${sections.join("")}</div>`;
  }

  boot().catch((err) => reportError(err));
})();
