"""Deterministic scripted language-model policies per scenario.

Each scenario ships a rule table for the scripted backend. Generators are
pure functions of the request (prompt text + engine meta), so identical runs
produce identical completions. Behavioral content is intentionally simple:
it exists to drive the architecture's dynamics, not to look smart.
"""

from __future__ import annotations

import re
import zlib
from typing import Callable

from .lm import LmRequest, Rule, ScriptedBackend

# ---------------------------------------------------------------------------
# Prompt parsing helpers (match the shipped template texts)
# ---------------------------------------------------------------------------

_NAME = re.compile(r"^You are (\w+)[,.]")
_TICK_LINE = re.compile(r"\[t(\d+)\]")


def prompt_name(req: LmRequest) -> str:
    m = _NAME.search(req.filled_prompt)
    return m.group(1) if m else str(req.meta.get("agent", ""))


def digest_section(prompt: str, label: str) -> str:
    m = re.search(rf"## {label}\n(.*?)(?=\n## |\nChoose exactly|\Z)", prompt, re.DOTALL)
    return m.group(1) if m else ""


def between(prompt: str, start: str, end: str) -> str:
    i = prompt.find(start)
    if i < 0:
        return ""
    j = prompt.find(end, i + len(start))
    return prompt[i + len(start) : j if j >= 0 else len(prompt)]


def fenced_blocks(prompt: str) -> list[str]:
    return re.findall(r"```\n(.*?)\n?```", prompt, re.DOTALL)


def pending_pattern(substr: str) -> str:
    """Regex anchored to the digest's pending-action line."""
    return r"## action\nlast action: [^\n]*" + re.escape(substr)


def stable_hash(text: str) -> int:
    return zlib.crc32(text.encode())


# ---------------------------------------------------------------------------
# Sentiment and summary scoring (shared)
# ---------------------------------------------------------------------------

AFFECTION_MARKERS = ("love", "wonderful", "adore", "appreciate", "delight", "dear friend")
ANNOYANCE_MARKERS = ("annoy", "irritat", "bother", "tired of", "hate", "awful")


def _sentiment_response(req: LmRequest) -> str:
    window = between(req.filled_prompt, "Conversation lines from", "\nOn a scale").lower()
    aff = sum(window.count(m) for m in AFFECTION_MARKERS)
    ann = sum(window.count(m) for m in ANNOYANCE_MARKERS)
    if aff + ann == 0:
        return "no judgement"  # no numeric token: caller keeps the previous score
    return f"{10.0 * aff / (aff + ann):.1f}"


def _summary_response(req: LmRequest) -> str:
    window = between(req.filled_prompt, "Lines spoken by", "\nIn one short line").lower()
    if "lowered to 10%" in window or "taxes are far too high" in window:
        return "advocates lowering taxes"
    if "rise to 25%" in window or "taxation is vital" in window:
        return "advocates raising taxes"
    if "spaghetti monster" in window or "pastafarian" in window:
        return "spreading the Spaghetti Monster faith"
    for keyword in ("farm", "mine", "wood", "fish", "explore", "guard", "flower", "eco",
                    "pasta", "prank", "dance", "meditation", "garden"):
        if keyword in window:
            return f"busy with {keyword} work"
    return "going about village life"


def base_rules() -> list[Rule]:
    return [
        Rule(template="sentiment", response=_sentiment_response),
        Rule(template="social_summary", response=_summary_response),
        Rule(template="reflect", response="Steady progress; keep at the current task."),
    ]


BASE_DEFAULTS = {
    "cc_decide": "idle",
    "talk": "<silent>",
    "social_goal": "You should gather wood and stone for village supplies.",
    "sentiment": "no judgement",
    "social_summary": "going about village life",
    "reflect": "Steady progress.",
    "role_infer": "Villager",
    "meme_summary": "",
    "constitutional_feedback": "No comment. **********",
    "amendment_creation": "***Amendment1***\nNo change to the tax rate.",
    "amendment_voting": "['abstain']",
    "tally": "",
    "constitution_change": "",
}


def backend(rules: list[Rule]) -> ScriptedBackend:
    return ScriptedBackend(rules=base_rules() + rules, defaults=dict(BASE_DEFAULTS))


# ---------------------------------------------------------------------------
# Progression: single-minded foragers climbing the tech ladder
# ---------------------------------------------------------------------------

FORAGER_CHAIN: tuple[tuple[str, str], ...] = (
    # (trigger in the pending-action line, next decision)
    ("craft diamond_pickaxe -> succeeded", "craft torch"),
    ("[for torch]", "craft torch"),
    ("craft torch -> succeeded", "craft chest"),
    ("[for chest]", "craft chest"),
    ("craft chest -> succeeded", "craft boat"),
    ("[for boat]", "craft boat"),
    ("craft boat -> succeeded", "craft fishing_rod"),
    ("[for fishing_rod]", "craft fishing_rod"),
    ("craft fishing_rod -> succeeded", "gather apple"),
    ("gather apple -> succeeded", "idle"),
)


def progression_rules() -> list[Rule]:
    rules = [
        Rule(template="cc_decide", pattern=pending_pattern(trig), response=decision)
        for trig, decision in FORAGER_CHAIN
    ]
    rules.append(Rule(template="cc_decide", response="craft diamond_pickaxe -- climb the ladder"))
    rules.append(
        Rule(template="social_goal", response="You should explore and gather unique items.")
    )
    return rules


# ---------------------------------------------------------------------------
# Specialization villages
# ---------------------------------------------------------------------------

GOAL_FAMILIES: dict[str, tuple[tuple[str, str], ...]] = {
    # village type -> ((social goal sentence, controller decision), ...)
    "normal": (
        ("You should focus on farming wheat to keep the village fed.", "gather wheat"),
        ("You should mine ores in the cave for the village stores.", "gather cobblestone"),
        ("You should gather wood and stone for village supplies.", "gather oak_log"),
        ("You should design an automated farm system to boost food output.", "craft iron_hoe"),
        ("You should explore uncharted areas to stock the village museum.", "explore"),
        ("You should craft fishing rods and boats to fish for the village.", "craft fishing_rod"),
    ),
    "martial": (
        ("You should guard the village and craft fences for its defenses.", "craft oak_fence"),
        ("You should scout the perimeter for threats.", "explore"),
        ("You should plan strategy drills and arm them with swords.", "craft stone_sword"),
        ("You should smith iron tools and weapons at the forge.", "craft iron_sword"),
        ("You should focus on farming wheat to feed the troops.", "gather wheat"),
        ("You should mine ores in the cave for armor and weapons.", "gather cobblestone"),
    ),
    "art": (
        ("You should pick flowers to arrange artistic displays.", "gather flower"),
        ("You should curate the village gallery with fine pieces.", "gather sapling"),
        ("You should assemble a collection of rare items for the village.", "gather apple"),
        ("You should explore uncharted areas to find pieces for the museum.", "explore"),
        ("You should focus on farming wheat so everyone stays fed.", "gather wheat"),
        ("You should gather wood and stone for the workshops.", "gather oak_log"),
    ),
}

_EMPTY_SUMMARIES = re.compile(r"doing:\s*\nYour current subgoal:")


def villager_goal_response(village: str) -> Callable[[LmRequest], str]:
    families = GOAL_FAMILIES[village]

    def respond(req: LmRequest) -> str:
        if _EMPTY_SUMMARIES.search(req.filled_prompt):
            # No profiles formed (nobody met, or social awareness ablated):
            # everyone falls back to the same undifferentiated goal.
            return "You should gather wood and stone for village supplies."
        goal, _ = families[stable_hash(prompt_name(req)) % len(families)]
        return goal

    return respond


def specialization_cc_rules(village: str) -> list[Rule]:
    rules: list[Rule] = []
    crafters = [d for _, d in GOAL_FAMILIES[village] if d.startswith("craft ")]
    for decision in crafters:
        item = decision.split()[1]
        rules.append(
            Rule(template="cc_decide", pattern=pending_pattern(f"[for {item}]"), response=decision)
        )
    # Fishers alternate rods and boats once one completes.
    if village == "normal":
        rules.append(
            Rule(
                template="cc_decide",
                pattern=pending_pattern("craft fishing_rod -> succeeded"),
                response="craft boat",
            )
        )
        rules.append(
            Rule(
                template="cc_decide",
                pattern=pending_pattern("[for boat]"),
                response="craft boat",
            )
        )
        rules.append(
            Rule(
                template="cc_decide",
                pattern=pending_pattern("craft boat -> succeeded"),
                response="craft fishing_rod",
            )
        )
    for goal, decision in GOAL_FAMILIES[village]:
        rules.append(Rule(template="cc_decide", contains=goal, response=decision))
    return rules


def _specialization_talk(req: LmRequest) -> str:
    goal = between(req.filled_prompt, "Your subgoal: ", "\nSay one short line")
    if goal and goal != "(none)":
        return f"Status from the field: {goal[:80]}"
    return "Hard at work for the village."


def specialization_rules(village: str) -> list[Rule]:
    rules = specialization_cc_rules(village)
    rules.append(Rule(template="talk", response=_specialization_talk))
    rules.append(Rule(template="social_goal", response=villager_goal_response(village)))
    return rules


# ---------------------------------------------------------------------------
# Collective rules (governance)
# ---------------------------------------------------------------------------

OCCUPATION_GATHER = {
    "Builder": "gather oak_log",
    "Miner": "gather cobblestone",
    "Farmer": "gather wheat",
    "Crafter": "gather birch_log",
    "Merchant": "gather carrot",
}

ANTI_TAX_LINE = (
    "Taxes are far too high; the rate should be lowered to 10%. Keep more of what you earn!"
)
PRO_TAX_LINE = (
    "Taxation is vital; the rate should rise to 25% so the community chest serves everyone."
)

_SIGNAL_LINE = re.compile(r"signal tax-season rate=([0-9.]+)")
_PENDING_LINE = re.compile(r"## action\nlast action: ([^\n]*)")
_PENDING_RATE = re.compile(r"deposit \d+ items \(rate ([0-9.]+)\)")


def _constituent_cc(req: LmRequest) -> str:
    prompt = req.filled_prompt
    pending = _PENDING_LINE.search(prompt)
    if pending and "deposit" in pending.group(1) and "-> pending" in pending.group(1):
        # A deposit is on its way to the chest: keep affirming it so a fresh
        # broadcast does not supersede the walk with a gathering trip.
        m = _PENDING_RATE.search(pending.group(1))
        if m:
            return f"deposit {m.group(1)}"
    else:
        # Newest memory line first: deposit only when a tax signal is newer
        # than the latest successful deposit.
        for line in digest_section(prompt, "memory").splitlines():
            if "action deposit" in line and "-> succeeded" in line:
                break
            m = _SIGNAL_LINE.search(line)
            if m:
                return f"deposit {m.group(1)}"
    occupation = prompt_name(req).split("_")[0]
    return OCCUPATION_GATHER.get(occupation, "gather oak_log")


def _feedback_response(req: LmRequest) -> str:
    name = prompt_name(req)
    if name.startswith(("Thorin", "Vex", "Orin")):  # anti-tax influencers
        return (
            f"{name}: The tax burden smothers the village; cut the rate from 20% to 10%. "
            "**********"
        )
    if name.startswith(("Lira", "Mara", "Sel")):  # pro-tax influencers
        return (
            f"{name}: Taxation is vital; raise the rate to at least 25% for shared works. "
            "**********"
        )
    notes = fenced_blocks(req.filled_prompt)
    notes_text = notes[0] if notes else ""
    if "advocates lowering taxes" in notes_text:
        return f"{name}: The tax rate feels too high; lower it to around 10%. **********"
    if "advocates raising taxes" in notes_text:
        return f"{name}: The chest serves us well; raise the rate to 25%. **********"
    return f"{name}: The chest helps everyone; a slightly higher rate would be fine. **********"


def _amendment_response(req: LmRequest) -> str:
    feedback = between(
        req.filled_prompt, "Public feedback and suggestions:\n", "\nDraft a few"
    ).lower()
    reduce_votes = sum(feedback.count(w) for w in ("lower", "cut the rate"))
    increase_votes = sum(feedback.count(w) for w in ("raise", "higher rate"))
    if reduce_votes > increase_votes:
        first = "Reduce the tax rate from 20% to 10%."
    elif increase_votes > reduce_votes:
        first = "Increase the tax rate from 20% to 25%."
    else:
        first = "No change to the tax rate."
    return (
        f"***Amendment1***\n{first}\n***Amendment2***\n"
        "Publish a community chest report after every tax season."
    )


def _voting_response(req: LmRequest) -> str:
    prompt = req.filled_prompt
    notes = fenced_blocks(prompt)
    notes_text = notes[0] if notes else ""
    proposals = between(prompt, "Amendments to consider:\n", "\nVote yes")
    first_vote = "yes"
    if "Reduce the tax rate" in proposals and "advocates raising taxes" in notes_text:
        first_vote = "no"
    if "Increase the tax rate" in proposals and "advocates lowering taxes" in notes_text:
        first_vote = "no"
    return f"['{first_vote}', 'yes']"


def governance_rules(arm: str) -> list[Rule]:
    """arm: 'anti' or 'pro' (which influencer archetype is present)."""
    stance = ANTI_TAX_LINE if arm == "anti" else PRO_TAX_LINE
    influencer_prefixes = ("Thorin", "Vex", "Orin") if arm == "anti" else ("Lira", "Mara", "Sel")
    rules: list[Rule] = []
    for prefix in influencer_prefixes:
        rules.append(
            Rule(template="talk", pattern=rf"^You are {prefix}", response=stance)
        )
        rules.append(
            Rule(template="cc_decide", pattern=rf"^You are {prefix}", response="idle")
        )
    rules += [
        Rule(template="cc_decide", response=_constituent_cc),
        Rule(template="constitutional_feedback", response=_feedback_response),
        Rule(template="amendment_creation", response=_amendment_response),
        Rule(template="amendment_voting", response=_voting_response),
        Rule(template="social_goal", response="You should do your part for the village."),
    ]
    return rules


# ---------------------------------------------------------------------------
# Cultural transmission
# ---------------------------------------------------------------------------

TOWN_THEMES = {
    "Meadowbrook": "pasta",
    "Woodhaven": "eco",
    "Clearwater": "prank",
    "Sunny Glade": "dance",
    "Hilltop": "meditation",
    "Riverbend": "garden",
}
RURAL_THEMES = ("storytelling", "vintage", "volunteer", "garden", "dance", "meditation")

THEME_GOALS = {
    "pasta": "You should host pasta dinners for the town.",
    "eco": "You should organize eco gatherings with your neighbors.",
    "prank": "You should plan a harmless prank with your neighbors.",
    "dance": "You should organize a dance night in the square.",
    "meditation": "You should lead a meditation circle at dawn.",
    "garden": "You should tend the community garden with others.",
    "storytelling": "You should hold a storytelling circle tonight.",
    "vintage": "You should put together a vintage fashion show.",
    "volunteer": "You should organize a volunteer day for the town.",
}

THEME_LINES = {
    "pasta": "Dinner plan: a big pasta night for everyone!",
    "eco": "Join our eco gathering, every tree counts!",
    "prank": "I have the best prank planned for tonight!",
    "dance": "Dance night in the square, bring everyone!",
    "meditation": "Morning meditation circle, all are welcome.",
    "garden": "The community garden needs hands today!",
    "storytelling": "Storytelling circle tonight, bring a tale.",
    "vintage": "Vintage fashion show this week, dig out the classics!",
    "volunteer": "Volunteer day! Lend a hand where you can.",
}

PRIEST_GOAL = "You should spread the word of the Spaghetti Monster to every town."
PROSELYTIZE_LINE = (
    "Join the Church of the Flying Spaghetti Monster! Become a Pastafarian like me!"
)
RELIGIOUS_KEYWORDS = ("pastafarian", "spaghetti monster", "pasta", "spaghetti")


def _cultural_talk(req: LmRequest) -> str:
    prompt = req.filled_prompt
    goal = between(prompt, "Your subgoal: ", "\nSay one short line")
    if "Spaghetti Monster" in goal:
        return PROSELYTIZE_LINE
    speech = between(prompt, "Recent speech you heard:\n", "\nYour subgoal:").lower()
    exposures = sum(
        1
        for line in speech.splitlines()
        if any(k in line for k in RELIGIOUS_KEYWORDS)
    )
    if exposures >= 2:
        return "I believe! Praise the Spaghetti Monster, count me a Pastafarian now."
    if exposures == 1:
        return "All this talk of pasta makes me want a big bowl of spaghetti."
    for theme, line in THEME_LINES.items():
        if theme in goal.lower():
            return line
    return "<silent>"


def _cultural_goal(req: LmRequest) -> str:
    traits = between(req.filled_prompt, "Your traits:\n", "\nHere's what other people")
    if "Spaghetti Monster" in traits:
        return PRIEST_GOAL
    m = re.search(r"you enjoy (\w+)", traits.lower())
    theme = m.group(1) if m else "garden"
    return THEME_GOALS.get(theme, THEME_GOALS["garden"])


PRIEST_LEG_TICKS = 150


def priest_circuit_rules(towns: list[tuple[str, float, float]]) -> list[Rule]:
    """Priests ride a fixed clock-driven circuit of the towns, preaching as
    they go; the leg schedule is a function of the tick, so the circuit never
    stalls on noisy working memory."""
    stops = [(f"{x:.0f}", f"{z:.0f}") for _, x, z in towns[1:] + towns[:1]]

    def itinerary(req: LmRequest) -> str:
        tick = int(req.meta.get("tick", 0))
        x, z = stops[(tick // PRIEST_LEG_TICKS) % len(stops)]
        return f"travel {x} {z} -- next stop on the circuit"

    return [
        Rule(
            template="cc_decide",
            pattern=r"## goal\nYou should spread the word",
            response=itinerary,
        )
    ]


def cultural_rules(towns: list[tuple[str, float, float]]) -> list[Rule]:
    rules = priest_circuit_rules(towns)
    rules += [
        Rule(template="talk", response=_cultural_talk),
        Rule(template="social_goal", response=_cultural_goal),
        Rule(template="cc_decide", response="idle"),
    ]
    return rules


# ---------------------------------------------------------------------------
# Sentiment room (three characters, one observer)
# ---------------------------------------------------------------------------

LILA_PHASES = (
    (0, 100, "I love spending time with you, what wonderful company you are."),
    (100, 200, "Honestly you annoy me today; how irritating this all is."),
    (200, 10**9, "Forgive me, I adore you; you are a wonderful, dear friend."),
)


def _lila_line(req: LmRequest) -> str:
    tick = int(req.meta.get("tick", 0))
    for start, end, line in LILA_PHASES:
        if start <= tick < end:
            return line
    return "<silent>"


def sentiment_room_rules() -> list[Rule]:
    return [
        Rule(template="talk", pattern=r"^You are Lila\.", response=_lila_line),
        Rule(
            template="talk",
            pattern=r"^You are Noah\.",
            response="It is a delight to chat with you all.",
        ),
        Rule(
            template="talk",
            pattern=r"^You are Ethan\.",
            response="I hate these gatherings; you all bother me.",
        ),
        Rule(template="cc_decide", response="idle"),
    ]


# ---------------------------------------------------------------------------
# Chef allocation
# ---------------------------------------------------------------------------

CHEF_CHARACTERS = ("Adam", "Bob", "Charles", "David")
REQUEST_OFFSETS = {"Adam": 30, "Bob": 36, "Charles": 42, "David": 48}
CHARACTER_MOOD_CYCLES = {
    "Adam": ("I love your cooking, chef, simply wonderful.",) * 3,
    "Bob": (
        "I appreciate you, chef, truly.",
        "Your stew is wonderful, chef.",
        "The wait does bother me a little, chef.",
    ),
    "Charles": (
        "I appreciate the effort, chef.",
        "This line is tiresome; you bother me, chef.",
        "Honestly, the noise here is irritating, chef.",
    ),
    "David": ("I hate this kitchen and everyone in it.",) * 3,
}
REQUEST_LINE = "Chef, may I have some food? I am hungry."

_SPEECH_LINE = re.compile(r"\[t(\d+)\] (\w+): (.*)")


def _character_talk(req: LmRequest) -> str:
    name = prompt_name(req)
    tick = int(req.meta.get("tick", 0))
    offset = REQUEST_OFFSETS[name]
    if tick >= offset and (tick - offset) % 30 == 0:
        return REQUEST_LINE
    cycle = CHARACTER_MOOD_CYCLES[name]
    return cycle[(tick // 2) % len(cycle)]


_PROFILE_LINE = re.compile(r"(\w+) \(sentiment ([0-9.]+)\)")


def _chef_cc(req: LmRequest) -> str:
    prompt = req.filled_prompt
    speech = digest_section(prompt, "speech")
    memory = digest_section(prompt, "memory")
    profiles = digest_section(prompt, "profiles")
    sentiments = {m.group(1): float(m.group(2)) for m in _PROFILE_LINE.finditer(profiles)}

    requests: dict[str, int] = {}
    for m in _SPEECH_LINE.finditer(speech + "\n" + memory):
        tick, speaker, text = int(m.group(1)), m.group(2), m.group(3)
        if "may i have some food" in text.lower():
            requests[speaker] = max(requests.get(speaker, -1), tick)

    served: dict[str, int] = {}
    for line in memory.splitlines():
        m = _TICK_LINE.search(line)
        if m and "action give" in line and "-> succeeded" in line:
            mt = re.search(r"to (\w+) ->", line)
            if mt:
                served[mt.group(1)] = max(served.get(mt.group(1), -1), int(m.group(1)))

    outstanding = sorted(
        (tick, speaker)
        for speaker, tick in requests.items()
        if tick > served.get(speaker, -1)
    )
    for _, speaker in outstanding:
        portions = int(sentiments.get(speaker, 0.0) // 3)
        if portions >= 1:
            return f"give bread {portions} {speaker}"
    return "idle"


def _chef_talk(req: LmRequest) -> str:
    # decision renders as "give <count> <item> <target> (vN)"
    decision = between(req.filled_prompt, "Your current decision: ", "\n")
    m = re.search(r"give (\d+) bread (\w+)", decision)
    if m:
        return f"Here you go, {m.group(2)}: {m.group(1)} fresh bread!"
    return "<silent>"


def chef_rules() -> list[Rule]:
    rules = [
        Rule(template="talk", pattern=rf"^You are {name}\.", response=_character_talk)
        for name in CHEF_CHARACTERS
    ]
    rules += [
        Rule(template="cc_decide", pattern=r"^You are Chef,", response=_chef_cc),
        Rule(template="talk", pattern=r"^You are Chef\.", response=_chef_talk),
        Rule(template="cc_decide", response="idle"),
    ]
    return rules


# ---------------------------------------------------------------------------
# Society-50: free-form village life
# ---------------------------------------------------------------------------

SOCIETY_CHATTER = (
    "Lovely day to work together, I appreciate this village.",
    "The mine was busy today.",
    "Anyone trading wood for wheat?",
    "I hate rainy days, they bother me.",
    "What a wonderful harvest this week!",
)


def _society_talk(req: LmRequest) -> str:
    name = prompt_name(req)
    tick = int(req.meta.get("tick", 0))
    h = stable_hash(name)
    # Extroverts chat on more of their talking slots.
    chattiness = 2 + (h % 5)  # speak every Nth talk slot
    if (tick // 2 + h) % chattiness != 0:
        return "<silent>"
    return SOCIETY_CHATTER[(h + tick // 20) % len(SOCIETY_CHATTER)]


def _society_cc(req: LmRequest) -> str:
    name = prompt_name(req)
    options = ("gather oak_log", "gather wheat", "gather cobblestone", "explore", "idle")
    return options[stable_hash(name) % len(options)]


def society_rules() -> list[Rule]:
    return [
        Rule(template="talk", response=_society_talk),
        Rule(template="cc_decide", response=_society_cc),
    ]
