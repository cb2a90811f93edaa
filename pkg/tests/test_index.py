import pytest

from conftest import sdf_record
from offsetforge.errors import FormatError, InvalidFilename, UnreadableFile
from offsetforge.index import (
    build_index,
    list_record_files,
    load_index_csv,
    verify_index,
    write_index_csv,
)
from offsetforge.integrity import IdentifierScheme, hash_key
from offsetforge.records import RecordLocation, iter_file_records

INCHI = "PUBCHEM_IUPAC_INCHI"


def naive_index(root, scheme, id_property=INCHI):
    """Single-threaded full scan, independent of build_index's merge."""
    rows = []
    for name in list_record_files(root):
        for rec in iter_file_records(root / name, name):
            full = rec.properties.get(id_property)
            if full is not None:
                rows.append((hash_key(full, scheme), name, rec.start_offset, full))
    return sorted(rows)


def index_rows(index):
    return [(k, loc.source_file, loc.byte_offset, full) for k, loc, full in index.iter_entries()]


def test_two_files_three_records(make_corpus):
    root, manifest = make_corpus(file_count=2, records_per_file=3, seed=1)
    idx = build_index(root)
    assert idx.entry_count == 6
    expected = sorted((e.identifier, e.filename, e.byte_offset, e.identifier) for e in manifest)
    assert index_rows(idx) == expected
    assert index_rows(idx) == naive_index(root, idx.scheme)
    assert [fp.source_file for fp in idx.fingerprint] == ["Compound_00000.sdf", "Compound_00001.sdf"]
    assert all(fp.size == (root / fp.source_file).stat().st_size for fp in idx.fingerprint)


def test_empty_directory(tmp_path):
    idx = build_index(tmp_path)
    assert idx.entry_count == 0
    assert idx.fingerprint == []


def test_missing_directory(tmp_path):
    with pytest.raises(UnreadableFile):
        build_index(tmp_path / "nope")


def test_worker_invariance_with_duplicates(make_corpus):
    root, _ = make_corpus(file_count=6, records_per_file=40, seed=9, duplicate_fraction=0.3)
    one = build_index(root, worker_count=1)
    many = build_index(root, worker_count=3)
    assert one == many
    assert index_rows(one) == naive_index(root, one.scheme)


def test_skips_records_without_identifier(make_corpus):
    root, manifest = make_corpus(file_count=2, records_per_file=50, seed=4, missing_id_fraction=0.2)
    idx = build_index(root)
    missing = sum(1 for e in manifest if not e.identifier)
    assert missing > 0
    assert idx.build_stats.records_skipped == missing
    assert idx.entry_count == len(manifest) - missing


def test_all_skipped_file_is_warning(tmp_path, caplog):
    (tmp_path / "a.sdf").write_bytes(sdf_record("x", [("OTHER", ["1"])]))
    idx = build_index(tmp_path)
    assert idx.entry_count == 0
    assert idx.build_stats.empty_files == ["a.sdf"]
    assert "no record carries" in caplog.text


def test_rejects_filename_with_comma(tmp_path):
    (tmp_path / "a,b.sdf").write_bytes(sdf_record("x", [(INCHI, ["1"])]))
    with pytest.raises(InvalidFilename):
        build_index(tmp_path)


def test_pattern_and_subdirectories(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "b.sdf").write_bytes(sdf_record("x", [(INCHI, ["b"])]))
    (tmp_path / "a.sdf").write_bytes(sdf_record("x", [(INCHI, ["a"])]))
    (tmp_path / "notes.txt").write_bytes(sdf_record("x", [(INCHI, ["c"])]))
    assert sorted(build_index(tmp_path).entries) == ["a"]
    idx = build_index(tmp_path, pattern="**/*.sdf")
    assert {loc.source_file for _, loc, _ in idx.iter_entries()} == {"a.sdf", "sub/b.sdf"}


def test_hashed_scheme_keeps_colliding_entries(tmp_path):
    # with 1-bit keys, three distinct identifiers must share a key somewhere
    ids = ["InChI=1S/A", "InChI=1S/B", "InChI=1S/C"]
    (tmp_path / "a.sdf").write_bytes(b"".join(sdf_record(i, [(INCHI, [i])]) for i in ids))
    idx = build_index(tmp_path, scheme=IdentifierScheme.hashed(1))
    assert idx.entry_count == 3
    assert max(len(v) for v in idx.entries.values()) >= 2
    for key, loc, full in idx.iter_entries():
        assert key == hash_key(full, idx.scheme)


def test_unreadable_file_continue_and_fail_fast(make_corpus, monkeypatch):
    root, _ = make_corpus(file_count=3, records_per_file=4, seed=2)
    from offsetforge import index as index_mod

    real = index_mod.iter_file_records

    def flaky(path, name=None):
        if name == "Compound_00001.sdf":
            raise PermissionError(13, "Permission denied")
        return real(path, name)

    monkeypatch.setattr(index_mod, "iter_file_records", flaky)
    idx = build_index(root)
    assert idx.entry_count == 8
    assert len(idx.build_stats.unreadable_files) == 1
    assert [fp.source_file for fp in idx.fingerprint] == ["Compound_00000.sdf", "Compound_00002.sdf"]
    with pytest.raises(UnreadableFile):
        build_index(root, fail_fast=True)


# -- CSV persistence -----------------------------------------------------------


def test_round_trip(make_corpus, tmp_path):
    root, _ = make_corpus(file_count=2, records_per_file=3, seed=1)
    idx = build_index(root)
    out = tmp_path / "idx.csv"
    size = write_index_csv(idx, out)
    assert size == out.stat().st_size
    lines = out.read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert data[0] == "identifier,filename,byte_offset"
    assert len(data) == 7
    assert load_index_csv(out) == idx


def test_round_trip_hashed_keeps_full_identifier(make_corpus, tmp_path):
    root, _ = make_corpus(file_count=2, records_per_file=20, seed=3)
    idx = build_index(root, scheme=IdentifierScheme.hashed(6))
    write_index_csv(idx, tmp_path / "h.csv")
    back = load_index_csv(tmp_path / "h.csv")
    assert back == idx
    assert back.scheme == IdentifierScheme.hashed(6)


def test_empty_index_is_header_only(tmp_path):
    idx = build_index(tmp_path)
    out = tmp_path / "e.csv"
    write_index_csv(idx, out)
    assert [l for l in out.read_text().splitlines() if not l.startswith("#")] == ["identifier,filename,byte_offset"]
    assert load_index_csv(out).entry_count == 0


def test_header_only_file(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("identifier,filename,byte_offset\n")
    idx = load_index_csv(p)
    assert idx.entry_count == 0
    assert idx.scheme.is_full


def test_comma_and_quote_identifiers_are_quoted(tmp_path):
    ids = ['InChI=1S/C2H6O/c1-2-3/h3H,2H2,1H3', 'odd "quoted", value', "#leading hash", " padded "]
    (tmp_path / "a.sdf").write_bytes(b"".join(sdf_record("m", [(INCHI, [i])]) for i in ids))
    idx = build_index(tmp_path)
    out = tmp_path / "q.csv"
    write_index_csv(idx, out)
    text = out.read_text()
    assert '"InChI=1S/C2H6O/c1-2-3/h3H,2H2,1H3",a.sdf,' in text
    assert '"odd ""quoted"", value",a.sdf,' in text
    assert load_index_csv(out) == idx


@pytest.mark.parametrize(
    "body, row",
    [
        ("identifier,filename,byte_offset\nx,a.sdf,-4\n", 2),
        ("identifier,filename,byte_offset\nx,a.sdf,0\ny,a.sdf,abc\n", 3),
        ("# scheme=full\nidentifier,filename,byte_offset\nx,a.sdf\n", 3),
        ("identifier,filename,offset\n", 1),
    ],
)
def test_format_errors_name_the_row(tmp_path, body, row):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(FormatError) as err:
        load_index_csv(p)
    assert err.value.row == row
    assert f"row {row}" in str(err.value)


def test_missing_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# scheme=full\n")
    with pytest.raises(FormatError, match="header"):
        load_index_csv(p)


def test_metadata_lines(make_corpus, tmp_path):
    root, _ = make_corpus(file_count=2, records_per_file=2, seed=5)
    idx = build_index(root, scheme=IdentifierScheme.hashed(12), id_property=INCHI)
    out = tmp_path / "m.csv"
    write_index_csv(idx, out)
    head = out.read_text().splitlines()[:4]
    assert head[0] == "# scheme=hashed:12"
    assert head[1] == f"# id_property={INCHI}"
    assert head[2] == f"# file=Compound_00000.sdf,{(root / 'Compound_00000.sdf').stat().st_size}"


# -- verification --------------------------------------------------------------


def test_verify_fresh_index(make_corpus):
    root, _ = make_corpus(file_count=3, records_per_file=15, seed=6, duplicate_fraction=0.3)
    s = verify_index(build_index(root), root, 1.0)
    assert s.checked == 45 and s.failed == 0 and s.drift == []


def test_verify_zero_sample(make_corpus):
    root, _ = make_corpus(file_count=1, records_per_file=5, seed=6)
    s = verify_index(build_index(root), root, 0.0)
    assert (s.checked, s.passed, s.failed) == (0, 0, 0)


def test_verify_reports_truncation(make_corpus):
    root, manifest = make_corpus(file_count=2, records_per_file=10, seed=6)
    idx = build_index(root)
    victim = root / "Compound_00001.sdf"
    victim.write_bytes(victim.read_bytes()[: manifest[15].byte_offset])
    s = verify_index(idx, root, 1.0)
    assert [d.source_file for d in s.drift] == ["Compound_00001.sdf"]
    assert s.failed == 5
    assert s.passed == 15


def test_verify_sample_is_deterministic(make_corpus):
    root, _ = make_corpus(file_count=2, records_per_file=30, seed=8)
    idx = build_index(root)
    a = verify_index(idx, root, 0.25, seed=3)
    b = verify_index(idx, root, 0.25, seed=3)
    assert a.checked == b.checked == 15
    assert a == b


def test_rekey_round_trip(make_corpus):
    root, _ = make_corpus(file_count=2, records_per_file=10, seed=1)
    idx = build_index(root)
    assert idx.rekeyed(IdentifierScheme.hashed(8)).rekeyed(IdentifierScheme.full()) == idx
    assert RecordLocation("a", 1) == RecordLocation("a", 1)
