// Account overview: renders the user's name, balance and feature list.
// Everything else in the payload is ignored on purpose.
(() => {
    async function boot() {
        const reply = await fetch("/api/data");
        const data = await reply.json();
        const features = data.features.map((f) => `<li>${f}</li>`).join("");
        const root = document.getElementById("root");
        root.innerHTML = [
            '<div id="main">',
            `<h1>${data.user.name}</h1>`,
            `<p class="balance">${data.account.balance} ${data.account.currency}</p>`,
            `<ul class="features">${features}</ul>`,
            "</div>",
        ].join("");
    }
    boot().catch((err) => reportError(err));
})();
