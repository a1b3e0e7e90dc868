import pytest

import dialport


@pytest.fixture(scope="module")
def lexicon():
    return dialport.load_lexicon(dialport.default_data_dir() / "lexicon.txt")


def test_parse_restaurant_request(lexicon):
    frame = dialport.parse("Can you recommend a restaurant in Pittsburgh?", lexicon)
    assert frame.domains["Restaurant"] == pytest.approx(0.95, abs=0.01)
    assert frame.intents["Request"] == pytest.approx(0.9, abs=0.01)
    assert frame.entities[0]["value"] == "Pittsburgh"
    assert frame.to_dict()["utterance"] == "Can you recommend a restaurant in Pittsburgh?"


def test_render_fills_slots():
    templates = "INFORM:weather => {location} is {condition}.\nBYE => Bye."
    acts = [
        {"act": "INFORM", "value": "", "class": "weather", "slots": {"location": "Boston", "condition": "sunny"}},
        {"act": "BYE"},
    ]
    assert dialport.render(acts, templates) == "Boston is sunny. Bye."
    with pytest.raises(dialport.DialportError):
        dialport.render([{"act": "ASK", "value": "x"}], templates)


def test_chat_index_gate():
    index = dialport.ChatIndex([("how are you", "fine"), ("who are you", "a bot")])
    assert index.respond("how are you") == "fine"
    assert index.respond("completely unrelated") is None
    row, score, _ = index.best_match("who are you")
    assert row == 1 and score == pytest.approx(1.0)


def test_portal_conversation():
    portal = dialport.Portal(seed=0)
    session = portal.create_session()
    assert session["active_agent"] == "skylar"
    sid = session["session_id"]
    assert portal.say(sid, "what is the weather")["reply"] == "Which city are you interested in?"
    assert portal.say(sid, "bye")["ended"]
    with pytest.raises(dialport.DialportError):
        portal.say(sid, "hello")
    speakers = [e["speaker"] for e in portal.transcript(sid)]
    assert speakers == ["system", "user", "system", "user", "system"]
