"""Generates the bundled news-style corpus (news.jsonl).

Each article is 8-14 template sentences about one topic. Its reference
summary paraphrases two or three consecutive sentences starting at a focus
position drawn uniformly over the article, so summary positions range from
the lead to the tail. Output is deterministic for a given seed.

    python3 generate.py > news.jsonl
"""
import json
import random
import sys

TOPICS = {
    "economy": {
        "actors": ["the central bank", "finance minister Lena Ortiz", "the treasury", "retail investors", "the chamber of commerce", "economists at Northfield University"],
        "things": ["interest rates", "the inflation outlook", "consumer spending", "the housing market", "export orders", "wage growth", "the trade deficit"],
        "verbs": ["revised", "warned about", "questioned", "welcomed", "reported on", "analysed"],
        "places": ["Harbor City", "the capital", "the northern provinces", "Eastport"],
    },
    "sports": {
        "actors": ["coach Marta Lindqvist", "the home side", "striker Dario Fenn", "the league committee", "club officials", "the visiting team"],
        "things": ["the final match", "the transfer window", "the injury list", "ticket sales", "the championship table", "the training schedule"],
        "verbs": ["defended", "criticised", "celebrated", "reviewed", "postponed", "announced"],
        "places": ["Riverside Stadium", "the national arena", "Westfield", "the southern league"],
    },
    "weather": {
        "actors": ["the weather service", "emergency crews", "local farmers", "the coastal authority", "forecasters", "residents"],
        "things": ["heavy rainfall", "the storm warning", "flood defences", "crop damage", "power outages", "the heat wave"],
        "verbs": ["tracked", "prepared for", "reported", "measured", "responded to", "warned of"],
        "places": ["the valley", "Lake Marren", "the coastal towns", "Greystone county"],
    },
    "science": {
        "actors": ["researchers at Kellam Institute", "a team of astronomers", "biologist Priya Nandakumar", "the space agency", "laboratory staff", "the review panel"],
        "things": ["the new telescope", "a rare mineral", "the clinical data", "the ocean samples", "a distant comet", "the gene study"],
        "verbs": ["examined", "published findings on", "confirmed", "described", "catalogued", "replicated"],
        "places": ["the polar station", "the mountain observatory", "Kellam campus", "the research vessel"],
    },
    "politics": {
        "actors": ["the opposition leader", "parliament", "mayor Tomas Reyes", "the election board", "coalition partners", "the prime minister"],
        "things": ["the budget bill", "the voting reform", "the regional election", "a corruption inquiry", "the housing policy", "the tax proposal"],
        "verbs": ["debated", "rejected", "approved", "delayed", "challenged", "negotiated"],
        "places": ["the assembly hall", "the capital", "Port Alder", "the western district"],
    },
    "technology": {
        "actors": ["the startup Brightwire", "software engineers", "the regulator", "chip maker Solnet", "privacy advocates", "the telecom operator"],
        "things": ["the data breach", "a new smartphone", "the network upgrade", "the security patch", "cloud prices", "the app store rules"],
        "verbs": ["unveiled", "investigated", "patched", "criticised", "tested", "rolled out"],
        "places": ["the tech park", "Silverbay", "the northern data centre", "the trade fair"],
    },
    "health": {
        "actors": ["hospital managers", "the health ministry", "nurses unions", "doctor Amara Osei", "the vaccine board", "patient groups"],
        "things": ["waiting times", "the flu season", "a new clinic", "drug shortages", "the screening program", "emergency wards"],
        "verbs": ["expanded", "reviewed", "warned about", "funded", "monitored", "reorganised"],
        "places": ["the general hospital", "rural clinics", "Milltown", "the eastern region"],
    },
    "education": {
        "actors": ["teachers", "the school board", "university leaders", "student unions", "education minister Rosa Klein", "parents"],
        "things": ["exam results", "tuition fees", "the reading program", "school meals", "teacher salaries", "the new curriculum"],
        "verbs": ["protested", "praised", "overhauled", "evaluated", "funded", "debated"],
        "places": ["state schools", "the city campus", "Brookvale", "rural districts"],
    },
    "transport": {
        "actors": ["the rail operator", "commuters", "the transport authority", "airline Skyreach", "bus drivers", "city planners"],
        "things": ["train delays", "the new metro line", "fuel prices", "airport expansion", "the cycling network", "ticket fares"],
        "verbs": ["opened", "suspended", "expanded", "complained about", "redesigned", "approved"],
        "places": ["Central Station", "the ring road", "Northgate airport", "the harbour bridge"],
    },
    "environment": {
        "actors": ["conservation groups", "the environment agency", "forest rangers", "fishing communities", "climate scientists", "volunteers"],
        "things": ["river pollution", "the wildlife reserve", "carbon emissions", "plastic waste", "the wetland project", "tree planting"],
        "verbs": ["documented", "protected", "cleaned up", "measured", "restored", "campaigned for"],
        "places": ["the delta", "Pinecrest forest", "the northern coast", "Willow marshes"],
    },
}

TEMPLATES = [
    "{Actor} {verb} {thing} in {place} on {day}.",
    "According to {actor}, {thing} remained a concern for {place}.",
    "Officials said {thing} could affect {number} thousand people across {place}.",
    "{Actor} told reporters that {thing} was discussed at length.",
    "A spokesperson for {actor} declined to comment on {thing}.",
    "Figures released on {day} showed a change of {number} percent in {thing}.",
    "Critics argued that {actor} had ignored {thing} for years.",
    "The debate over {thing} is expected to continue into next month.",
    "In {place}, {actor} {verb} {thing} after weeks of pressure.",
    "Analysts compared {thing} with conditions seen {number} years ago.",
    "{Actor} plans to publish a full report on {thing} by the end of the year.",
    "Local groups in {place} organised meetings about {thing}.",
    "Earlier this week {actor} {verb} {thing} for the second time.",
    "Observers noted that {thing} drew unusual attention in {place}.",
]

DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]

# Light paraphrase used when turning article sentences into summary sentences.
PARAPHRASE = {
    "said": "stated",
    "reporters": "the press",
    "concern": "worry",
    "expected": "likely",
    "weeks": "a period",
    "organised": "held",
    "published": "released",
    "publish": "release",
    "full": "complete",
    "critics": "opponents",
    "argued": "claimed",
    "analysts": "experts",
    "noted": "observed",
}

DROP = {"the", "a", "at", "for", "of", "on", "in"}


def cap(s):
    return s[0].upper() + s[1:]


def sentence(rng, topic):
    t = TOPICS[topic]
    actor = rng.choice(t["actors"])
    return rng.choice(TEMPLATES).format(
        actor=actor,
        Actor=cap(actor),
        verb=rng.choice(t["verbs"]),
        thing=rng.choice(t["things"]),
        place=rng.choice(t["places"]),
        day=rng.choice(DAYS),
        number=rng.randint(2, 40),
    )


def paraphrase(rng, s):
    words = s.rstrip(".").split()
    out = []
    for i, w in enumerate(words):
        low = w.lower()
        if i > 0 and low in DROP and rng.random() < 0.5:
            continue
        rep = PARAPHRASE.get(low)
        out.append(rep if rep and i > 0 else w)
    return cap(" ".join(out)) + "."


def article(rng, idx):
    topic = rng.choice(sorted(TOPICS))
    n = rng.randint(8, 14)
    sents = []
    while len(sents) < n:
        s = sentence(rng, topic)
        if s not in sents:
            sents.append(s)
    k = rng.choice([2, 3])
    focus = rng.randint(0, n - k)
    summary = " ".join(paraphrase(rng, s) for s in sents[focus:focus + k])
    return {
        "id": f"news-{idx:03d}",
        "topic": topic,
        "article": " ".join(sents),
        "summary": summary,
    }


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 20210401
    count = int(sys.argv[2]) if len(sys.argv) > 2 else 120
    rng = random.Random(seed)
    for i in range(count):
        print(json.dumps(article(rng, i), sort_keys=True, ensure_ascii=False))


if __name__ == "__main__":
    main()
