import json

import pytest

from phonekit import (
    CorpusError,
    RecordError,
    Utterance,
    Vocabulary,
    build_examples,
    build_vocab,
    filter_utterances,
    grapheme_tokens,
    read_corpus,
    strip_suprasegmentals,
    tokenize,
)


def utt(i="u1", lang="eng", text="possum", ipa="pʰɔsəm", dur=None):
    return Utterance(id=i, lang=lang, text=text, ipa=ipa, duration_s=dur)


def corpus_line(**kw):
    base = {"id": "u1", "lang": "eng", "text": "possum", "ipa": "pʰɔsəm"}
    base.update(kw)
    return json.dumps(base, ensure_ascii=False)


class TestUtterance:
    def test_lang_validation(self):
        with pytest.raises(CorpusError):
            Utterance(id="x", lang="EN", text="", ipa="")
        Utterance(id="x", lang="unk", text="", ipa="")

    def test_empty_id_rejected(self):
        with pytest.raises(CorpusError):
            Utterance(id="", lang="eng", text="", ipa="")

    def test_lang_token(self):
        assert utt().lang_token == "<eng>"
        assert utt(lang="unk").lang_token == "<unk>"


class TestReadCorpus:
    def test_one_valid_line(self):
        items = list(read_corpus([corpus_line()]))
        assert len(items) == 1 and isinstance(items[0], Utterance)

    def test_missing_field_reports_and_continues(self):
        lines = [corpus_line(), json.dumps({"id": "u2", "lang": "eng", "text": "x"}), corpus_line(id="u3")]
        items = list(read_corpus(lines))
        assert isinstance(items[0], Utterance)
        assert isinstance(items[1], RecordError) and items[1].line == 2
        assert "ipa" in items[1].message
        assert isinstance(items[2], Utterance)

    def test_three_lines_in_order(self):
        lines = [corpus_line(id=f"u{i}") for i in range(3)]
        ids = [u.id for u in read_corpus(lines)]
        assert ids == ["u0", "u1", "u2"]

    def test_malformed_json_line_number(self):
        items = list(read_corpus(["{not json"]))
        assert isinstance(items[0], RecordError) and items[0].line == 1

    def test_blank_lines_skipped(self):
        assert len(list(read_corpus(["", corpus_line(), "  "]))) == 1

    def test_bad_lang_is_record_error(self):
        items = list(read_corpus([corpus_line(lang="english")]))
        assert isinstance(items[0], RecordError)


class TestFilterUtterances:
    def test_max_phones_boundary(self):
        over = utt(i="over", ipa="a" * 301)
        at = utt(i="at", ipa="a" * 300)
        kept, report = filter_utterances([over, at])
        kept = list(kept)
        assert [u.id for u in kept] == ["at"]
        assert report.dropped == {"max_phones": 1}
        assert report.dropped_ids["max_phones"] == ["over"]

    def test_lang_blocklist(self):
        kept, report = filter_utterances([utt(lang="ina")], lang_blocklist={"ina"})
        assert list(kept) == []
        assert report.dropped == {"lang_blocklist": 1}

    def test_duration_bounds(self):
        utts = [utt(i="short", dur=0.1), utt(i="ok", dur=5.0), utt(i="long", dur=40.0)]
        kept, report = filter_utterances(utts, min_dur_s=0.5, max_dur_s=30.0)
        assert [u.id for u in kept] == ["ok"]
        assert report.dropped == {"duration": 2}

    def test_untokenizable_dropped_not_fatal(self):
        kept, report = filter_utterances([utt(i="bad", ipa="a?b"), utt(i="ok")])
        assert [u.id for u in kept] == ["ok"]
        assert report.dropped == {"untokenizable": 1}

    def test_duplicate_ids_dropped(self):
        kept, report = filter_utterances([utt(i="dup"), utt(i="dup"), utt(i="ok")])
        assert [u.id for u in kept] == ["dup", "ok"]
        assert report.dropped == {"duplicate_id": 1}

    def test_retained_hours_per_language(self):
        utts = [utt(i="a", lang="eng", dur=3600.0), utt(i="b", lang="deu", dur=1800.0)]
        kept, report = filter_utterances(utts)
        list(kept)
        assert report.retained_hours == {"eng": 1.0, "deu": 0.5}
        assert report.kept == 2


class TestBuildExamples:
    def test_possum_four_tasks(self):
        pr, asr, g2p, p2g = build_examples(utt())
        phones = ("/pʰ/", "/ɔ/", "/s/", "/ə/", "/m/")
        graphemes = tuple("possum")
        assert pr.task == "pr" and pr.prompt == ("<na>",) and pr.target == phones
        assert asr.task == "asr" and asr.prompt == ("<na>",) and asr.target == graphemes
        assert g2p.task == "g2p" and g2p.prompt == graphemes and g2p.target == phones
        assert p2g.task == "p2g" and p2g.prompt == phones and p2g.target == graphemes
        assert all(e.lang_token == "<eng>" and e.utterance_id == "u1" for e in (pr, asr, g2p, p2g))

    def test_cross_task_consistency(self):
        pr, asr, g2p, p2g = build_examples(utt())
        assert pr.target == g2p.target
        assert p2g.prompt == pr.target
        assert "".join(asr.target) == utt().text
        assert asr.target == g2p.prompt

    def test_task_tokens(self):
        assert [e.task_token for e in build_examples(utt())] == ["<pr>", "<asr>", "<g2p>", "<p2g>"]

    def test_english_refinement_flag(self, table):
        u = utt(ipa="bæt")
        plain = build_examples(u)[0].target
        refined = build_examples(u, refine_eng=True, table=table)[0].target
        assert plain == ("/b/", "/æ/", "/t/")
        assert refined == ("/p/", "/æ/", "/t/")

    def test_refinement_skips_non_english(self, table):
        u = utt(lang="deu", ipa="bæt")
        assert build_examples(u, refine_eng=True, table=table)[0].target[0] == "/b/"

    def test_tokenize_failure_carries_id(self):
        with pytest.raises(CorpusError, match="u1"):
            build_examples(utt(ipa="a?b"))

    def test_to_json_deterministic(self):
        a = build_examples(utt())[0].to_json()
        b = build_examples(utt())[0].to_json()
        assert a == b
        payload = json.loads(a)
        assert payload["task"] == "pr" and payload["task_token"] == "<pr>"


class TestBuildVocab:
    def test_inventory_and_encoder_set(self):
        utts = [utt(ipa="pʰɔ"), utt(i="u2", ipa="eː")]
        vocab = build_vocab(utts)
        assert vocab.phones == ("/eː/", "/pʰ/", "/ɔ/")
        assert vocab.encoder_ctc[0] == "<blank>"
        assert "/e/" in vocab.encoder_ctc and "/eː/" not in vocab.encoder_ctc

    def test_encoder_set_is_stripped_image(self):
        utts = [utt(ipa="t͡ʃaː pʰi.du")]
        vocab = build_vocab(utts)
        image = set()
        seq = tokenize(utts[0].ipa)
        for tok in strip_suprasegmentals(seq).tokens:
            image.add(f"/{tok.surface}/")
        assert set(vocab.encoder_ctc[1:]) == image

    def test_empty_corpus(self):
        with pytest.raises(CorpusError, match="empty phone inventory"):
            build_vocab([])

    def test_deterministic(self):
        utts = [utt(), utt(i="u2", lang="deu", ipa="zip")]
        assert build_vocab(utts).render() == build_vocab(list(reversed(utts))).render()

    def test_language_tokens_in_specials(self):
        vocab = build_vocab([utt(), utt(i="u2", lang="deu", ipa="da")])
        assert "<deu>" in vocab.specials and "<eng>" in vocab.specials

    def test_unknown_language_reuses_unk(self):
        vocab = build_vocab([utt(lang="unk")])
        assert vocab.specials.count("<unk>") == 1

    def test_subword_collision_listed(self):
        with pytest.raises(CorpusError, match="/pʰ/"):
            build_vocab([utt()], subwords=["/pʰ/"])

    def test_duplicate_subwords_rejected(self):
        with pytest.raises(CorpusError, match="duplicate"):
            build_vocab([utt()], subwords=["ab", "ab"])

    def test_render_parse_round_trip(self):
        vocab = build_vocab([utt()], subwords=["po", "ssum"])
        again = Vocabulary.parse(vocab.render())
        assert again == vocab

    def test_blank_first_in_encoder(self):
        vocab = build_vocab([utt()])
        assert vocab.encoder_ctc.index("<blank>") == 0


def test_grapheme_tokens_round_trip():
    assert "".join(grapheme_tokens("hello world")) == "hello world"
