import gzip
import io

import pytest
from hypothesis import given, settings, strategies as st

from conftest import sdf_record
from oracles import record_spans
from offsetforge.errors import MalformedRecord, SeekOutOfRange
from offsetforge.records import RecordReader, get_property, parse_properties, read_record_at, stream_records

INCHI = "PUBCHEM_IUPAC_INCHI"


def records(data, **kw):
    return list(stream_records(io.BytesIO(data), "f.sdf", **kw))


def test_two_records_offsets_match_byte_scan(make_corpus):
    root, manifest = make_corpus(file_count=1, records_per_file=2, seed=7)
    data = (root / "Compound_00000.sdf").read_bytes()
    recs = records(data)
    spans, _ = record_spans(data)
    assert len(recs) == 2
    assert recs[1].start_offset == len(recs[0].raw)
    assert [(r.start_offset, r.end_offset) for r in recs] == spans


def test_empty_stream():
    assert records(b"") == []


def test_trailing_whitespace_ignored():
    body = sdf_record("a", [(INCHI, ["x"])]) + sdf_record("b", [(INCHI, ["y"])])
    data = body + b"\n\r\n  \n"
    recs = records(data)
    assert len(recs) == 2
    assert b"".join(r.raw for r in recs) == body
    assert recs[-1].end_offset == len(data) - len(b"\n\r\n  \n")


def test_unterminated_tail_is_malformed():
    good = sdf_record("a", [(INCHI, ["x"])])
    with pytest.raises(MalformedRecord) as err:
        records(good + b"orphan\nM  END\n")
    assert err.value.offset == len(good)


def test_dollar_substring_does_not_split():
    rec = sdf_record("a", [("NOTE", ["cost $$$$ per gram", "$$$$x", " $$$$"]), (INCHI, ["x"])])
    recs = records(rec + sdf_record("b", [(INCHI, ["y"])]))
    assert len(recs) == 2
    assert recs[0].raw == rec
    assert get_property(recs[0], "NOTE") == "cost $$$$ per gram\n$$$$x\n $$$$"


def test_small_chunks_give_same_partition(make_corpus):
    root, _ = make_corpus(file_count=1, records_per_file=40, seed=3, line_terminator="CRLF")
    data = (root / "Compound_00000.sdf").read_bytes()
    assert [r.raw for r in records(data, chunk_size=5)] == [r.raw for r in records(data)]


def test_delimiter_at_eof_without_newline():
    data = sdf_record("a", [(INCHI, ["x"])])[:-1]
    (rec,) = records(data)
    assert rec.raw == data
    assert get_property(rec, INCHI) == "x"


def test_decompressing_reader(make_corpus):
    root, _ = make_corpus(file_count=1, records_per_file=20, seed=5)
    data = (root / "Compound_00000.sdf").read_bytes()
    gz = io.BytesIO(gzip.compress(data))
    with gzip.open(gz, "rb") as fh:
        assert [r.raw for r in stream_records(fh, "x")] == [r.raw for r in records(data)]


@pytest.mark.parametrize("terminator", ["LF", "CRLF"])
def test_read_record_at_third_of_five(make_corpus, terminator):
    root, _ = make_corpus(file_count=1, records_per_file=5, seed=11, line_terminator=terminator)
    path = root / "Compound_00000.sdf"
    streamed = records(path.read_bytes())
    with open(path, "rb") as fh:
        rec = read_record_at(fh, streamed[2].start_offset, "f.sdf")
    assert rec == streamed[2]


def test_read_record_at_single_record_file(tmp_path):
    data = sdf_record("only", [(INCHI, ["InChI=1S/CH4/h1H4"])])
    p = tmp_path / "one.sdf"
    p.write_bytes(data)
    with open(p, "rb") as fh:
        assert read_record_at(fh, 0).raw == data


def test_read_record_at_bounds(tmp_path):
    data = sdf_record("only", [(INCHI, ["x"])])
    p = tmp_path / "one.sdf"
    p.write_bytes(data)
    with open(p, "rb") as fh:
        with pytest.raises(SeekOutOfRange):
            read_record_at(fh, len(data))
        with pytest.raises(SeekOutOfRange):
            read_record_at(fh, -1)


def test_read_record_at_missing_delimiter(tmp_path):
    p = tmp_path / "bad.sdf"
    p.write_bytes(b"name\nM  END\n> <X>\n1\n\n")
    with open(p, "rb") as fh, pytest.raises(MalformedRecord):
        read_record_at(fh, 0)


def test_get_property_single_value():
    rec = records(sdf_record("methane", [("PUBCHEM_COMPOUND_CID", ["297"]), (INCHI, ["InChI=1S/CH4/h1H4"])]))[0]
    assert get_property(rec, INCHI) == "InChI=1S/CH4/h1H4"
    assert get_property(rec, "PUBCHEM_COMPOUND_CID") == "297"
    assert get_property(rec, "NOPE") is None


@pytest.mark.parametrize("nl", [b"\n", b"\r\n"])
def test_get_property_multiline_value_matches_raw_slice(nl):
    rec = records(sdf_record("m", [("SYNONYMS", ["water", "oxidane"])], nl=nl))[0]
    start = rec.raw.index(b"water")
    end = rec.raw.index(b"oxidane") + len(b"oxidane")
    assert get_property(rec, "SYNONYMS") == rec.raw[start:end].decode()
    assert get_property(rec, "SYNONYMS") == "water" + nl.decode() + "oxidane"


def test_duplicate_property_last_wins():
    rec = records(sdf_record("d", [("X", ["1"]), ("Y", ["2"]), ("X", ["3"])]))[0]
    assert rec.properties == {"X": "3", "Y": "2"}
    assert rec.duplicate_property_count == 1


def test_header_variants_and_empty_value():
    raw = b"n\n\n\nM  END\n>  <A> (1)\nv\n\n> 25 <B>\n\n$$$$\n"
    props, _ = parse_properties(raw)
    assert props == {"A": "v", "B": ""}


def test_property_round_trip_through_file(tmp_path):
    data = sdf_record("m", [(INCHI, ["InChI=1S/C2H6O/c1-2-3/h3H,2H2,1H3"])])
    p = tmp_path / "m.sdf"
    p.write_bytes(data)
    with open(p, "rb") as fh:
        assert get_property(read_record_at(fh, 0), INCHI) == "InChI=1S/C2H6O/c1-2-3/h3H,2H2,1H3"


def test_undecodable_bytes_kept_in_raw():
    data = sdf_record("m", [("X", ["ok"])]).replace(b"hand", b"h\xffnd")
    (rec,) = records(data)
    assert rec.raw == data
    assert rec.properties["X"] == "ok"


def test_reader_reads_through_short_gaps(make_corpus):
    root, manifest = make_corpus(file_count=1, records_per_file=30, seed=2)
    path = root / "Compound_00000.sdf"
    picks = manifest[::3]
    with open(path, "rb", buffering=0) as fh:
        reader = RecordReader(fh, "x", buffer_size=64 * 1024, block_size=1024)
        for e in picks:
            assert len(reader.read_at(e.byte_offset).raw) == e.byte_length
        assert reader.physical_seeks == 1
        assert reader.bytes_read <= path.stat().st_size


def test_reader_slack_bound(make_corpus):
    root, manifest = make_corpus(file_count=1, records_per_file=200, seed=4)
    path = root / "Compound_00000.sdf"
    picks = manifest[::17]
    buffer_size = 4096
    with open(path, "rb", buffering=0) as fh:
        reader = RecordReader(fh, "x", buffer_size=buffer_size, block_size=1024)
        for e in reversed(picks):  # backwards: every read seeks
            reader.read_at(e.byte_offset)
    assert reader.bytes_read <= sum(e.byte_length for e in picks) + buffer_size * len(picks)


# -- properties over arbitrary record layouts ---------------------------------

_text = st.text(st.characters(min_codepoint=32, max_codepoint=126, blacklist_characters="<>$"), max_size=20)
_record = st.tuples(
    _text,
    st.lists(st.tuples(st.from_regex(r"[A-Z_]{1,8}", fullmatch=True), st.lists(_text.filter(str.strip), max_size=3)),
             max_size=4),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(_record, max_size=6), st.sampled_from([b"\n", b"\r\n"]), st.sampled_from([b"", b"\n", b" \r\n\n"]),
       st.integers(min_value=1, max_value=64))
def test_lossless_partition_and_seek_agreement(tmp_path_factory, recs, nl, trailer, chunk):
    body = b"".join(sdf_record(name or "n", props, nl=nl) for name, props in recs)
    data = body + trailer
    streamed = records(data, chunk_size=chunk)
    spans, end = record_spans(data)
    assert [(r.start_offset, r.end_offset) for r in streamed] == spans
    assert b"".join(r.raw for r in streamed) + data[end:] == data
    p = tmp_path_factory.mktemp("prop") / "f.sdf"
    p.write_bytes(data)
    with open(p, "rb") as fh:
        for r in streamed:
            assert read_record_at(fh, r.start_offset, "f.sdf") == r
    for (name, props), r in zip(recs, streamed):
        expected = {}
        for pname, value in props:
            expected[pname] = nl.decode().join(value)
        assert r.properties == expected
