"""Regenerate the bundled synthetic navigation models.

    python3 tools/build_models.py [--out src/qgram_art/models]

The models are graded by size and by how many edges sit behind guards that a
short random path rarely satisfies (repeated actions, counters, multi-step
setup).  The petclinic-like model is hand written and not touched here.
"""

import argparse
import json
from pathlib import Path

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "src" / "qgram_art" / "models"


def edge(src, method, dest, params=None, guard=None, effects=None):
    doc = {"id": f"{src}.{method}", "source": src, "dest": dest, "method": method}
    if params:
        doc["params"] = params
    if guard is not None:
        doc["guard"] = guard
    if effects:
        doc["effects"] = effects
    return doc


def pool(name, values):
    return {"name": name, "domain": {"string_pool": list(values)}}


def ints(name, lo, hi):
    return {"name": name, "domain": {"int_range": [lo, hi]}}


def ref(name, coll):
    return {"name": name, "domain": {"ref_collection": coll, "fallback": [0, 9]}}


def model(name, home, edges, variables=None, collections=None):
    nodes = []
    for e in edges:
        for n in (e["source"], e["dest"]):
            if n not in nodes:
                nodes.append(n)
    if home in nodes:
        nodes.remove(home)
    return {
        "schema": 1,
        "name": name,
        "nodes": [home, *nodes],
        "home": home,
        "state": {"variables": variables or {}, "collections": collections or {}},
        "edges": edges,
    }


def menu_flat():
    edges = []
    for section in ("News", "Sports", "Weather", "Music", "Movies", "Games"):
        edges.append(edge("Home", f"goTo{section}", section))
        edges.append(edge(section, "refresh", section))
        edges.append(edge(section, "goHome", "Home"))
    return model("menu-flat", "Home", edges)


def notes_app():
    edges = [
        edge("Login", "login", "Notes", [pool("user", ["ann", "bob"]), pool("password", ["secret", "guess", ""])],
             ["eq", ["arg", "password"], "secret"], [["set", "logged_in", True]]),
        edge("Login", "help", "Help"),
        edge("Help", "back", "Login"),
        edge("Notes", "newNote", "Editor"),
        edge("Notes", "open", "Note", [ref("note", "notes")], ["in", ["arg", "note"], ["coll", "notes"]]),
        edge("Notes", "logout", "Login", effects=[["set", "logged_in", False]]),
        edge("Editor", "save", "Notes", [pool("text", ["todo", "shopping", ""])],
             ["ne", ["arg", "text"], ""], [["insert", "notes"]]),
        edge("Editor", "cancel", "Notes"),
        edge("Note", "delete", "Notes", [ref("note", "notes")], ["in", ["arg", "note"], ["coll", "notes"]],
             [["remove", "notes", ["arg", "note"]]]),
        edge("Note", "edit", "Editor"),
        edge("Note", "back", "Notes"),
        edge("Notes", "search", "Results", [pool("query", ["todo", "x"])], ["nonempty", "notes"]),
        edge("Results", "back", "Notes"),
    ]
    return model("notes-app", "Login", edges, {"logged_in": False}, {"notes": []})


def shop_like():
    edges = [
        edge("Catalog", "browse", "Product", [ints("product", 0, 9)], ["lt", ["arg", "product"], 6]),
        edge("Catalog", "openCart", "Cart"),
        edge("Catalog", "openOrders", "Orders"),
        edge("Product", "addToCart", "Product", [ints("qty", 1, 5)], ["le", ["arg", "qty"], 3],
             [["insert", "cart"]]),
        edge("Product", "back", "Catalog"),
        edge("Product", "openCart", "Cart"),
        edge("Cart", "remove", "Cart", [ref("item", "cart")], ["in", ["arg", "item"], ["coll", "cart"]],
             [["remove", "cart", ["arg", "item"]]]),
        edge("Cart", "checkout", "Checkout", guard=["ge", ["size", "cart"], 2]),
        edge("Cart", "continueShopping", "Catalog"),
        edge("Checkout", "pay", "Confirmation", [pool("card", ["visa", "amex", "expired"])],
             ["ne", ["arg", "card"], "expired"], [["clear", "cart"], ["inc", "orders"]]),
        edge("Checkout", "back", "Cart"),
        edge("Confirmation", "goToCatalog", "Catalog"),
        edge("Confirmation", "viewOrders", "Orders"),
        edge("Orders", "back", "Catalog"),
        edge("Orders", "reorder", "Checkout", guard=["ge", ["var", "orders"], 1], effects=[["insert", "cart"]]),
        edge("Orders", "rate", "Review", guard=["ge", ["var", "orders"], 2]),
        edge("Review", "submit", "Orders", [ints("stars", 1, 5)]),
        edge("Review", "cancel", "Orders"),
    ]
    return model("shop-like", "Catalog", edges, {"orders": 0}, {"cart": []})


def forum_like():
    edges = [
        edge("Board", "register", "Profile", [pool("user", ["ann", "bob", ""])], ["ne", ["arg", "user"], ""],
             [["set", "member", True]]),
        edge("Board", "openThread", "Thread", [ref("thread", "threads")],
             ["in", ["arg", "thread"], ["coll", "threads"]]),
        edge("Board", "newThread", "Compose", guard=["eq", ["var", "member"], True]),
        edge("Board", "search", "Board", [pool("query", ["help", "bug"])]),
        edge("Compose", "publish", "Thread", [pool("title", ["help", "bug", ""])], ["ne", ["arg", "title"], ""],
             [["insert", "threads"], ["inc", "posts"]]),
        edge("Compose", "discard", "Board"),
        edge("Thread", "reply", "Thread", [pool("text", ["+1", "thanks"])], ["eq", ["var", "member"], True],
             [["inc", "posts"]]),
        edge("Thread", "back", "Board"),
        edge("Thread", "report", "Thread", guard=["nonempty", "threads"]),
        edge("Profile", "back", "Board"),
        edge("Profile", "badges", "Badges", guard=["ge", ["var", "posts"], 3]),
        edge("Badges", "claimBronze", "Profile", guard=["ge", ["var", "posts"], 4], effects=[["set", "rank", 1]]),
        edge("Badges", "back", "Profile"),
        edge("Profile", "moderate", "ModQueue", guard=["ge", ["var", "rank"], 1]),
        edge("ModQueue", "approve", "ModQueue", guard=["nonempty", "threads"]),
        edge("ModQueue", "back", "Profile"),
    ]
    return model("forum-like", "Board", edges, {"member": False, "posts": 0, "rank": 0}, {"threads": []})


def warehouse_like():
    edges = [
        edge("Dashboard", "goToStock", "Stock"),
        edge("Dashboard", "goToOrders", "Orders"),
        edge("Dashboard", "goToReports", "Reports"),
        edge("Stock", "receive", "Stock", [ints("qty", 1, 9)], ["ge", ["arg", "qty"], 3], [["inc", "stock"]]),
        edge("Stock", "newItem", "Stock", effects=[["insert", "items"]]),
        edge("Stock", "back", "Dashboard"),
        edge("Orders", "create", "Order", [ref("item", "items")], ["in", ["arg", "item"], ["coll", "items"]],
             [["insert", "orders"]]),
        edge("Orders", "back", "Dashboard"),
        edge("Order", "pick", "Order", guard=["ge", ["var", "stock"], 1], effects=[["inc", "picked"]]),
        edge("Order", "pack", "Shipping", guard=["ge", ["var", "picked"], 2]),
        edge("Order", "back", "Orders"),
        edge("Shipping", "ship", "Dashboard", [pool("carrier", ["ups", "dhl", "none"])],
             ["ne", ["arg", "carrier"], "none"], [["inc", "shipped"]]),
        edge("Shipping", "back", "Order"),
        edge("Reports", "back", "Dashboard"),
        edge("Reports", "daily", "Report", guard=["ge", ["var", "shipped"], 1]),
        edge("Report", "back", "Reports"),
        edge("Report", "export", "Report", [pool("format", ["csv", "pdf"])], ["ge", ["var", "shipped"], 2]),
        edge("Reports", "audit", "Audit", guard=["and", ["ge", ["var", "shipped"], 2], ["ge", ["size", "items"], 3]]),
        edge("Audit", "close", "Reports"),
        edge("Audit", "signOff", "Dashboard", [pool("pin", ["0000", "1234", "9999"])],
             ["eq", ["arg", "pin"], "1234"]),
    ]
    return model("warehouse-like", "Dashboard", edges,
                 {"stock": 0, "picked": 0, "shipped": 0}, {"items": [], "orders": []})


def bank_like():
    # deepest model: the guarded edges need setup done on several different pages within one test
    verified = ["and", ["var", "email"], ["var", "phone"]]
    edges = [
        edge("Home", "login", "Accounts", [pool("password", ["right", "wrong"])], ["eq", ["arg", "password"], "right"]),
        edge("Home", "about", "About"),
        edge("About", "back", "Home"),
        edge("Accounts", "open", "Accounts", effects=[["insert", "accounts"]]),
        edge("Accounts", "select", "Account", [ref("account", "accounts")],
             ["in", ["arg", "account"], ["coll", "accounts"]]),
        edge("Accounts", "logout", "Home"),
        edge("Accounts", "goToLoans", "Loans"),
        edge("Accounts", "goToSettings", "Settings"),
        edge("Accounts", "goToPremium", "Premium", guard=["and", verified, ["var", "address"]]),
        edge("Settings", "verifyEmail", "Settings", effects=[["set", "email", True]]),
        edge("Settings", "verifyPhone", "Settings", [pool("code", ["123", "000", "999"])],
             ["eq", ["arg", "code"], "123"], [["set", "phone", True]]),
        edge("Settings", "editAddress", "Address"),
        edge("Settings", "back", "Accounts"),
        edge("Address", "save", "Settings", [pool("street", ["Main St", "Elm St", ""])],
             ["ne", ["arg", "street"], ""], [["set", "address", True]]),
        edge("Address", "cancel", "Settings"),
        edge("Account", "deposit", "Account", [ints("amount", 1, 9)], ["ge", ["arg", "amount"], 2],
             [["inc", "deposits"]]),
        edge("Account", "withdraw", "Account", guard=["ge", ["var", "deposits"], 1]),
        edge("Account", "statement", "Statement", guard=["ge", ["var", "deposits"], 2]),
        edge("Account", "transfer", "Transfer", guard=["ge", ["size", "accounts"], 2]),
        edge("Account", "back", "Accounts"),
        edge("Statement", "download", "Statement", [pool("format", ["pdf", "csv"])],
             ["ge", ["var", "deposits"], 3]),
        edge("Statement", "back", "Account"),
        edge("Transfer", "send", "Account", [ints("amount", 1, 9)], ["ge", ["var", "deposits"], 1],
             [["inc", "transfers"]]),
        edge("Transfer", "cancel", "Account"),
        edge("Loans", "apply", "LoanForm", guard=["and", verified, ["ge", ["var", "deposits"], 2]]),
        edge("Loans", "back", "Accounts"),
        edge("LoanForm", "submit", "LoanStatus", [ints("term", 1, 30)],
             ["and", ["le", ["arg", "term"], 24], ["ge", ["var", "transfers"], 1], ["var", "address"]],
             [["set", "loan", True]]),
        edge("LoanForm", "cancel", "Loans"),
        edge("LoanStatus", "accept", "Accounts", guard=["var", "loan"], effects=[["insert", "accounts"]]),
        edge("LoanStatus", "back", "Loans"),
        edge("Premium", "upgrade", "Accounts", guard=["and", ["var", "loan"], ["ge", ["var", "deposits"], 3]]),
        edge("Premium", "back", "Accounts"),
    ]
    return model("bank-like", "Home", edges,
                 {"email": False, "phone": False, "address": False, "deposits": 0, "transfers": 0,
                  "loan": False}, {"accounts": []})


BUILDERS = [menu_flat, notes_app, shop_like, forum_like, warehouse_like, bank_like]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for build in BUILDERS:
        doc = build()
        path = args.out / f"{doc['name']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"{path}: {len(doc['edges'])} edges")


if __name__ == "__main__":
    main()
