// Welcome page that keeps showing the loading spinner unless the owner's
// name arrived; the element the fuzzer waits for only exists after that.
(() => {
  interface ApiData {
    owner?: { name?: string };
    greeting: string;
    telemetry: { device: string; ip: string };
  }

  async function boot(): Promise<void> {
    const reply = await fetch("/api/data");
    const data: ApiData = await reply.json();
    const root = document.getElementById("root")!;
    if (!data.owner || data.owner.name === undefined) {
      root.innerHTML = '<p class="spinner">still loading</p>';
      return;
    }
    root.innerHTML = [
      '<div id="user-info">',
      `<h1>${data.owner.name}</h1>`,
      `<p>${data.greeting}</p>`,
      "</div>",
    ].join("");
  }

  boot().catch((err) => reportError(err));
})();
