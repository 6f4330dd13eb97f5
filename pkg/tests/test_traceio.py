"""File formats: Touchstone, CSV traces, manifests, results documents."""

import json
import math

import numpy as np
import pytest

from resospec.core import (
    DataFormatError,
    LineShape,
    LossCurve,
    ProbeGeometry,
    TWO_PI,
)
from resospec import traceio
from resospec.traceio import (
    ManifestEntry,
    SweepManifest,
    load_manifest,
    load_participation,
    parse_csv_or_touchstone,
    parse_csv_trace,
    parse_touchstone_s1p,
    read_results,
    write_csv_trace,
    write_manifest,
    write_results,
)

from test_core import make_fit
from test_core import FeatureFit  # re-exported via core import there


def make_feature(**over):
    kw = dict(
        species_label="x",
        shape=LineShape.LORENTZIAN,
        peak_height=1.2e4,
        center_field=0.28,
        width_field=0.01,
        area=3.4e-5,
        omega_r_ref=TWO_PI * 8e9,
        fit_window=(0.0, 0.45),
    )
    kw.update(over)
    return FeatureFit(**kw)


class TestTouchstone:
    def write(self, tmp_path, text, name="t.s1p"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_ri_format(self, tmp_path):
        path = self.write(tmp_path, "# GHz S RI R 50\n8.0 0.5 -0.5\n")
        tr = parse_touchstone_s1p(path)
        assert tr.freq[0] == pytest.approx(TWO_PI * 8e9, rel=1e-15)
        assert tr.s[0] == pytest.approx(0.5 - 0.5j, rel=1e-15)

    def test_ma_format_angle_in_degrees(self, tmp_path):
        path = self.write(tmp_path, "# MHz S MA R 50\n8000 0.5 -90\n")
        tr = parse_touchstone_s1p(path)
        assert tr.freq[0] == pytest.approx(TWO_PI * 8e9, rel=1e-15)
        assert tr.s[0] == pytest.approx(-0.5j, abs=1e-12)

    def test_db_format(self, tmp_path):
        a = 20.0 * math.log10(0.5)
        path = self.write(tmp_path, f"# Hz S DB R 50\n8e9 {a!r} 0\n")
        tr = parse_touchstone_s1p(path)
        assert abs(tr.s[0]) == pytest.approx(0.5, rel=1e-12)

    def test_default_option_line_is_ghz_ma(self, tmp_path):
        path = self.write(tmp_path, "8.0 1.0 0\n8.1 0.9 10\n")
        tr = parse_touchstone_s1p(path)
        assert tr.freq[1] == pytest.approx(TWO_PI * 8.1e9, rel=1e-15)
        assert tr.s[1] == pytest.approx(0.9 * np.exp(1j * math.radians(10)))

    @pytest.mark.parametrize(
        "mag,ang",
        [(1.0, 0.0), (0.5, -90.0), (0.03, 178.0), (2.5, 33.3), (1e-4, -179.9)],
    )
    def test_ri_ma_db_agree(self, tmp_path, mag, ang):
        ri = mag * complex(math.cos(math.radians(ang)), math.sin(math.radians(ang)))
        paths = {
            "ri": self.write(
                tmp_path, f"# GHz S RI R 50\n8.0 {ri.real!r} {ri.imag!r}\n", "a.s1p"
            ),
            "ma": self.write(tmp_path, f"# GHz S MA R 50\n8.0 {mag!r} {ang!r}\n", "b.s1p"),
            "db": self.write(
                tmp_path,
                f"# GHz S DB R 50\n8.0 {20 * math.log10(mag)!r} {ang!r}\n",
                "c.s1p",
            ),
        }
        vals = [parse_touchstone_s1p(p).s[0] for p in paths.values()]
        np.testing.assert_allclose([vals[0]] * 2, vals[1:], rtol=1e-9, atol=1e-12)

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = self.write(
            tmp_path,
            "! header comment\n\n# GHz S RI R 50\n8.0 1 0 ! trailing\n\n8.1 0 1\n",
        )
        tr = parse_touchstone_s1p(path)
        assert len(tr) == 2
        assert tr.s[1] == 1j

    def test_v2_keyword_rejected(self, tmp_path):
        path = self.write(tmp_path, "[Version] 2.0\n# GHz S RI R 50\n8.0 1 0\n")
        with pytest.raises(DataFormatError, match="v2 keyword"):
            parse_touchstone_s1p(path)

    def test_two_port_column_count_rejected(self, tmp_path):
        path = self.write(tmp_path, "# GHz S RI R 50\n8.0 1 0 0.5 0.5\n")
        with pytest.raises(DataFormatError, match="two-port"):
            parse_touchstone_s1p(path)

    def test_wrong_column_count_rejected(self, tmp_path):
        path = self.write(tmp_path, "# GHz S RI R 50\n8.0 1 0 3\n")
        with pytest.raises(DataFormatError, match="expected 3 columns"):
            parse_touchstone_s1p(path)

    def test_repeated_option_line_rejected(self, tmp_path):
        path = self.write(tmp_path, "# GHz S RI R 50\n# Hz S RI R 50\n8.0 1 0\n")
        with pytest.raises(DataFormatError, match="repeated option line"):
            parse_touchstone_s1p(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = self.write(tmp_path, "# GHz S RI R 50\n8.0 one 0\n")
        with pytest.raises(DataFormatError, match="non-numeric"):
            parse_touchstone_s1p(path)

    def test_non_monotone_frequency_rejected(self, tmp_path):
        path = self.write(tmp_path, "# GHz S RI R 50\n8.1 1 0\n8.0 1 0\n")
        with pytest.raises(DataFormatError, match="strictly increasing"):
            parse_touchstone_s1p(path)

    def test_empty_data_rejected(self, tmp_path):
        path = self.write(tmp_path, "! only comments\n# GHz S RI R 50\n")
        with pytest.raises(DataFormatError, match="no data rows"):
            parse_touchstone_s1p(path)


class TestCsvTrace:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        freq = TWO_PI * (8e9 + np.linspace(0, 1e6, 64))
        s = rng.normal(size=64) + 1j * rng.normal(size=64)
        tr = traceio._to_trace(freq / TWO_PI, s, "mem")
        path = str(tmp_path / "t.csv")
        write_csv_trace(path, tr)
        back = parse_csv_trace(path)
        np.testing.assert_array_equal(back.freq, tr.freq)
        np.testing.assert_array_equal(back.s, tr.s)

    def test_extra_columns_ignored(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("freq_hz,s_re,s_im,note\n1e9,0.5,-0.5,hello\n2e9,1,0,x\n")
        tr = parse_csv_trace(str(p))
        assert tr.s[0] == 0.5 - 0.5j

    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("freq_hz,s_re\n1e9,0.5\n")
        with pytest.raises(DataFormatError, match="'s_im'"):
            parse_csv_trace(str(p))

    def test_malformed_row_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("freq_hz,s_re,s_im\n1e9,0.5,oops\n")
        with pytest.raises(DataFormatError, match="malformed row"):
            parse_csv_trace(str(p))

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("")
        with pytest.raises(DataFormatError, match="empty file"):
            parse_csv_trace(str(p))

    def test_dispatch_on_extension(self, tmp_path):
        s1p = tmp_path / "t.s1p"
        s1p.write_text("# GHz S RI R 50\n8.0 1 0\n")
        assert parse_csv_or_touchstone(str(s1p)).s[0] == 1.0
        with pytest.raises(DataFormatError, match="two-port"):
            parse_csv_or_touchstone(str(tmp_path / "t.s2p"))


class TestManifest:
    def test_entries_sorted_and_deduplicated(self):
        m = SweepManifest(
            resonator_id="r0",
            geometry=ProbeGeometry.reflection(),
            entries=(
                ManifestEntry(b0=0.2, trace_path="b.csv"),
                ManifestEntry(b0=0.0, trace_path="a.csv"),
            ),
        )
        assert [e.b0 for e in m.entries] == [0.0, 0.2]
        with pytest.raises(ValueError, match="duplicate field"):
            SweepManifest(
                resonator_id="r0",
                geometry=ProbeGeometry.reflection(),
                entries=(
                    ManifestEntry(b0=0.1, trace_path="a.csv"),
                    ManifestEntry(b0=0.1, trace_path="b.csv"),
                ),
            )

    def test_write_load_round_trip(self, tmp_path):
        m = SweepManifest(
            resonator_id="r7",
            geometry=ProbeGeometry.hanger(),
            entries=(
                ManifestEntry(b0=0.0, trace_path="x"),
                ManifestEntry(b0=0.125, trace_path="y"),
            ),
            q_i_zero_field=2.5e5,
            b_wirebond=0.012,
        )
        path = str(tmp_path / "manifest.csv")
        write_manifest(path, m, ["traces/p0.csv", "traces/p1.csv"])
        back = load_manifest(path)
        assert back.resonator_id == "r7"
        assert str(back.geometry) == "hanger"
        assert back.q_i_zero_field == 2.5e5
        assert back.b_wirebond == 0.012
        assert [e.b0 for e in back.entries] == [0.0, 0.125]
        # Relative paths resolve against the manifest directory.
        assert back.entries[0].trace_path == str(tmp_path / "traces/p0.csv")

    def test_defaults_when_keys_absent(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "# resonator_id: a\n# geometry: reflection\n"
            "b0_tesla,trace_path\n0.0,t.csv\n"
        )
        m = load_manifest(str(p))
        assert m.b_wirebond == traceio.DEFAULT_B_WIREBOND == 0.010
        assert m.q_i_zero_field is None

    @pytest.mark.parametrize(
        "text,msg",
        [
            ("# resonator_id: a\nb0_tesla,trace_path\n0.0,t\n", "missing 'geometry'"),
            ("# geometry: hanger\nb0_tesla,trace_path\n0.0,t\n", "missing 'resonator_id'"),
            ("# resonator_id: a\n# geometry: hanger\nb0,path\n0,t\n", "expected header"),
            ("# bad preamble\nb0_tesla,trace_path\n0.0,t\n", "key: value"),
            (
                "# resonator_id: a\n# geometry: hanger\n"
                "b0_tesla,trace_path\n0.0,t\n0.0,u\n",
                "duplicate b0_tesla",
            ),
            ("# resonator_id: a\n# geometry: hanger\nb0_tesla,trace_path\n", "no manifest rows"),
        ],
    )
    def test_malformed_manifests(self, tmp_path, text, msg):
        p = tmp_path / "m.csv"
        p.write_text(text)
        with pytest.raises(DataFormatError, match=msg):
            load_manifest(str(p))


class TestParticipation:
    def test_load(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("resonator_id,p_f,p_sc\nr0,1e-4,2e-5\nr1,2e-4,4e-5\n")
        table = load_participation(str(p))
        assert table.lookup("r1").p_f == 2e-4

    def test_out_of_range_row_rejected(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("resonator_id,p_f,p_sc\nr0,1e-4,1.5\n")
        with pytest.raises(DataFormatError, match="p_sc"):
            load_participation(str(p))

    def test_missing_column_rejected(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("resonator_id,p_f\nr0,1e-4\n")
        with pytest.raises(DataFormatError, match="'p_sc'"):
            load_participation(str(p))


class TestResultsDocument:
    def test_round_trip_exact(self, tmp_path):
        fit = make_fit()
        feat = make_feature(width_left=0.01, width_right=0.02, shape=LineShape.SPLIT_LORENTZIAN)
        path = str(tmp_path / "results.json")
        write_results(path, [fit, feat])
        fits, feats = read_results(path)
        assert len(fits) == 1 and len(feats) == 1
        assert fits[0].omega_r == pytest.approx(fit.omega_r, rel=1e-12)
        assert fits[0].Q_i == pytest.approx(fit.Q_i, rel=1e-12)
        assert feats[0].width_right == feat.width_right
        assert feats[0].shape is LineShape.SPLIT_LORENTZIAN

    def test_empty_document(self, tmp_path):
        path = str(tmp_path / "results.json")
        write_results(path, [])
        fits, feats = read_results(path)
        assert fits == [] and feats == []

    def test_unsupported_object_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unsupported result object"):
            write_results(str(tmp_path / "r.json"), [object()])

    def test_schema_version_checked(self, tmp_path):
        path = tmp_path / "r.json"
        path.write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(DataFormatError, match="schema_version"):
            read_results(str(path))

    def test_unwritable_path_raises_oserror(self, tmp_path):
        with pytest.raises(OSError, match="cannot write"):
            write_results(str(tmp_path / "missing" / "r.json"), [])

    def test_deterministic_bytes(self, tmp_path):
        a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        write_results(a, [make_fit(), make_feature()])
        write_results(b, [make_fit(), make_feature()])
        assert open(a, "rb").read() == open(b, "rb").read()


class TestSweepDocAndCsv:
    def curve(self):
        return LossCurve(
            b0=np.array([0.0, 0.1, 0.2]),
            kappa_s=np.array([0.0, 1e4, 2e3]),
            omega_r_ref=TWO_PI * 8e9,
            sigma=np.array([1.0, 2.0, 3.0]),
        )

    def test_sweep_results_doc_layout(self):
        from resospec.core import FieldSweepPoint

        pts = [FieldSweepPoint(b0=b, fit=make_fit()) for b in (0.0, 0.1, 0.2)]
        doc = traceio.sweep_results_doc("r0", pts, self.curve(), [make_feature()])
        assert doc["schema_version"] == traceio.RESULTS_SCHEMA_VERSION
        assert doc["resonator_id"] == "r0"
        assert doc["resonator_fits"][1]["b0_tesla"] == 0.1
        assert doc["loss_curve"]["sigma_rad_per_s"] == [1.0, 2.0, 3.0]
        assert len(doc["feature_fits"]) == 1

    def test_loss_csv(self, tmp_path):
        path = tmp_path / "loss.csv"
        traceio.write_loss_csv(str(path), self.curve())
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "b0_tesla,kappa_s_rad_per_s,sigma_rad_per_s"
        assert len(lines) == 4
        assert [float(x) for x in lines[2].split(",")] == [0.1, 1e4, 2.0]

    def test_features_csv(self, tmp_path):
        path = tmp_path / "features.csv"
        traceio.write_features_csv(str(path), [make_feature()])
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("species_label,shape,peak_height_rad_per_s")
        fields = lines[1].split(",")
        assert fields[0] == "x" and fields[1] == "lorentzian"
        # Split-only columns stay empty for a plain Lorentzian.
        assert fields[5] == "" and fields[6] == ""
