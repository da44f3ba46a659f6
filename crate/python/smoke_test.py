#!/usr/bin/env python3
"""Smoke test for the scorefront_py extension module.

Builds are found in ../target/{release,debug}; the cdylib is copied into a
temp dir under the importable name. Run from the repo root:

    cargo build -p scorefront-py --release
    python3 python/smoke_test.py
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent

GIVE_XML = """<?xml version="1.0"?>
<score-partwise><part-list><score-part id="P1"/></part-list><part id="P1">
<measure number="1">
<attributes><divisions>100</divisions></attributes>
<direction><sound tempo="60"/></direction>
<note><pitch><step>G</step><octave>3</octave></pitch><duration>37</duration>
<lyric><syllabic>single</syllabic><text>give</text></lyric></note>
</measure></part></score-partwise>"""


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libscorefront_py.so",
        ROOT / "target" / "debug" / "libscorefront_py.so",
        ROOT / "target" / "release" / "scorefront_py.dll",
        ROOT / "target" / "debug" / "scorefront_py.dll",
        ROOT / "target" / "release" / "libscorefront_py.dylib",
        ROOT / "target" / "debug" / "libscorefront_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built extension found; run: cargo build -p scorefront-py")
    staging = pathlib.Path(tempfile.mkdtemp(prefix="scorefront_py_"))
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy2(built, staging / f"scorefront_py{suffix}")
    sys.path.insert(0, str(staging))
    import scorefront_py

    return scorefront_py


def give_sequence(sf):
    inventory = sf.Inventory.default()
    lexicon = sf.Lexicon.parse("GIVE  g ih1 v\n", inventory)
    score = sf.parse_musicxml(GIVE_XML.encode())
    return sf.align(score, lexicon, inventory), inventory


def check_parse(sf):
    data = (ROOT / "assets" / "demo_score.musicxml").read_bytes()
    score = sf.parse_musicxml(data)
    assert score.note_count == 8, score.note_count
    assert abs(score.duration_seconds() - 7.2) < 1e-9
    assert score.validate() == []


def check_align(sf):
    seq, inventory = give_sequence(sf)
    assert len(inventory) == 84
    names = seq.token_names(inventory)
    assert names == ["<s>", "g", "ih1", "v", "<wb>"], names
    ramps = [round(t[4], 2) for t in seq.tokens()]
    assert ramps == [0.0, 1.0, 0.67, 0.33, 0.0], ramps
    durations = [t[3] for t in seq.tokens()[1:]]
    assert all(abs(d - 0.37) < 1e-9 for d in durations)


def check_phonemize(sf):
    inventory = sf.Inventory.default()
    lexicon = sf.Lexicon.parse("GIVE  g ih1 v\nTWINKLE  t w ih1 ng k ah0 l\n", inventory)
    assert sf.phonemize(["give,"], lexicon) == [["g", "ih1", "v"]]
    groups = sf.syllabify("TWINKLE", ["t", "w", "ih1", "ng", "k", "ah0", "l"], 2)
    assert groups == [["t", "w", "ih1", "ng"], ["k", "ah0", "l"]], groups


def check_features(sf):
    seq, inventory = give_sequence(sf)
    matrix = sf.build_features(seq, 0.37, 0.1, inventory)
    assert matrix.rows == 5 and matrix.cols == 104, (matrix.rows, matrix.cols)
    row = matrix.row(1)  # the "g" row
    assert row[inventory.id_of("g")] == 1.0
    assert sum(row[:84]) == 1.0
    with tempfile.NamedTemporaryFile(suffix=".utf1", delete=False) as handle:
        path = handle.name
    matrix.write(path)
    restored = sf.FeatureMatrix.read(path)
    assert restored.to_rows() == matrix.to_rows()
    assert restored.score_id == matrix.score_id
    pathlib.Path(path).unlink()


def check_grid(sf):
    data = (ROOT / "assets" / "demo_score.musicxml").read_bytes()
    score = sf.parse_musicxml(data)
    variants, failures = sf.augmentation_grid(score)
    assert len(variants) == 35, len(variants)
    assert failures == []
    up = sf.transpose(score, 3)
    back = sf.transpose(up, -3)
    assert back.canonical_dump() == score.canonical_dump()
    histogram = sf.pitch_change_histogram([score])
    assert sum(histogram.values()) > 0


def check_split(sf):
    data = (ROOT / "assets" / "demo_score.musicxml").read_bytes()
    score = sf.parse_musicxml(data)
    segments = sf.segment_score(score, 2.0, 5.0)
    assert len(segments) >= 1
    total = sum(s.duration_seconds for s in segments)
    assert abs(total - score.duration_seconds()) < 1e-9
    chunks = sf.chunk_for_mushra(segments[0], score, 10.0)
    assert chunks, "at least one chunk"


def check_stats(sf):
    a = [60.0, 62.5, 58.0, 61.0, 64.5, 59.5]
    b = [31.0, 29.5, 33.0, 30.0, 28.5, 32.5]
    t, df, p, flagged = sf.welch_t_test(a, b)
    assert flagged and p < 0.001
    try:
        from scipy import stats as scipy_stats
    except ImportError:
        print("  (scipy unavailable; skipped cross-check)")
        return
    reference = scipy_stats.ttest_ind(a, b, equal_var=False)
    assert abs(t - reference.statistic) < 1e-9, (t, reference.statistic)
    assert abs(p - reference.pvalue) < 1e-9, (p, reference.pvalue)
    for df_check in (1.0, 2.0, 10.0, 100.0):
        for t_check in (-5.0, -1.0, 0.0, 1.0, 5.0):
            ours = sf.student_t_cdf(t_check, df_check)
            theirs = scipy_stats.t.cdf(t_check, df_check)
            assert abs(ours - theirs) < 1e-9, (df_check, t_check, ours, theirs)


def check_report(sf):
    lines = ["listener_id,chunk_id,system_id,score"]
    for listener in range(10):
        for system, mean in (("rec", 81.62), ("prop", 60.45), ("base", 30.82)):
            offset = 3.0 if listener % 2 == 0 else -3.0
            lines.append(f"L{listener},c1,{system},{mean + offset}")
    report = json.loads(sf.mushra_report_json("\n".join(lines).encode()))
    assert len(report["tests"]) == 3
    assert all(test["flagged"] for test in report["tests"])
    means = {s["system_id"]: round(s["mean"], 2) for s in report["summaries"]}
    assert means == {"rec": 81.62, "prop": 60.45, "base": 30.82}, means


CHECKS = [
    ("parse demo score", check_parse),
    ("align worked example", check_align),
    ("phonemize and syllabify", check_phonemize),
    ("feature matrix round trip", check_features),
    ("augmentation grid", check_grid),
    ("split and chunks", check_split),
    ("statistics against scipy", check_stats),
    ("mushra report", check_report),
]


def main():
    sf = load_module()
    failures = 0
    for name, fn in CHECKS:
        try:
            fn(sf)
            print(f"PASS {name}")
        except AssertionError as error:
            failures += 1
            print(f"FAIL {name}: {error}")
    if failures:
        sys.exit(f"{failures} of {len(CHECKS)} checks failed")
    print(f"all {len(CHECKS)} checks passed")


if __name__ == "__main__":
    main()
