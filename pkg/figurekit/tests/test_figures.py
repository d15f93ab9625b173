import os

import pytest

from figurekit.figures import (
    FIGURE_IDS,
    FIGURE_INPUTS,
    FigureError,
    FigureSpec,
    read_table,
    render,
)
from figurekit.cli import ROLE_FILES, main, spec_for


def make_spec(figure_id, csv_dir, out_dir, fmt="svg"):
    return spec_for(figure_id, str(csv_dir), str(out_dir), 0.2, fmt)


class TestRender:
    @pytest.mark.parametrize("figure_id", FIGURE_IDS)
    def test_renders_without_error(self, figure_id, csv_dir, tmp_path):
        result = render(make_spec(figure_id, csv_dir, tmp_path))
        assert os.path.exists(result.output_path)
        assert len(result.data_hash) == 64

    def test_fig1_has_both_threshold_guides(self, csv_dir, tmp_path):
        result = render(make_spec("fig1", csv_dir, tmp_path))
        names = [g[0] for g in result.guides]
        assert names == ["width", "abs_err"]
        assert all(g[1] == 0.2 for g in result.guides)
        svg = open(result.output_path).read()
        assert svg.count("stroke-dasharray") >= 2

    @pytest.mark.parametrize("figure_id", FIGURE_IDS)
    def test_data_hash_stable_across_renders(self, figure_id, csv_dir, tmp_path):
        a = render(make_spec(figure_id, csv_dir, tmp_path / "a"))
        b = render(make_spec(figure_id, csv_dir, tmp_path / "b"))
        assert a.data_hash == b.data_hash

    def test_png_output(self, csv_dir, tmp_path):
        result = render(make_spec("fig2", csv_dir, tmp_path, fmt="png"))
        assert result.output_path.endswith(".png")
        assert os.path.getsize(result.output_path) > 0

    def test_deterministic_svg_bytes(self, csv_dir, tmp_path):
        a = render(make_spec("fig3", csv_dir, tmp_path / "a"))
        b = render(make_spec("fig3", csv_dir, tmp_path / "b"))
        assert open(a.output_path, "rb").read() == open(b.output_path, "rb").read()


class TestValidation:
    def test_empty_csv_is_error_and_writes_nothing(self, tmp_path):
        empty = tmp_path / "runs.csv"
        empty.write_text("")
        out = tmp_path / "fig1.svg"
        spec = FigureSpec("fig1", {"runs": str(empty)}, str(out))
        with pytest.raises(FigureError):
            render(spec)
        assert not out.exists()

    def test_header_only_csv_is_error(self, tmp_path):
        p = tmp_path / "runs.csv"
        p.write_text("rule,p_phi,width,abs_err,outcome\n")
        with pytest.raises(FigureError, match="no data rows"):
            render(FigureSpec("fig1", {"runs": str(p)}, str(tmp_path / "o.svg")))

    def test_missing_columns_listed(self, tmp_path):
        p = tmp_path / "runs.csv"
        p.write_text("rule,p_phi\nwidth_only,0.0\n")
        with pytest.raises(FigureError, match="width"):
            render(FigureSpec("fig1", {"runs": str(p)}, str(tmp_path / "o.svg")))

    def test_unknown_figure_id(self, tmp_path):
        with pytest.raises(FigureError):
            FigureSpec("fig9", {}, str(tmp_path / "x.svg"))

    def test_missing_role(self, tmp_path):
        with pytest.raises(FigureError, match="role"):
            render(FigureSpec("fig1", {}, str(tmp_path / "x.svg")))

    def test_read_table_skips_metadata(self, csv_dir):
        rows = read_table(csv_dir / "runs.csv")
        assert rows and "rule" in rows[0]


class TestCli:
    def test_render_all(self, csv_dir, tmp_path, capsys):
        code = main(["--which", "all", "--in", str(csv_dir), "--out", str(tmp_path)])
        assert code == 0
        for figure_id in FIGURE_IDS:
            assert (tmp_path / f"{figure_id}.svg").exists()
        out = capsys.readouterr().out
        assert out.count("data_hash=") == len(FIGURE_IDS)

    def test_single_figure(self, csv_dir, tmp_path):
        code = main(["--which", "fig5", "--in", str(csv_dir), "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "fig5.svg").exists()

    def test_missing_input_exits_one(self, tmp_path):
        code = main(["--which", "fig1", "--in", str(tmp_path / "none"),
                     "--out", str(tmp_path)])
        assert code == 1

    def test_bad_flag_exits_one(self, tmp_path):
        assert main(["--which", "fig99", "--in", ".", "--out", "."]) == 1

    def test_role_files_cover_inputs(self):
        for figure_id in FIGURE_IDS:
            for role in FIGURE_INPUTS[figure_id]:
                assert role in ROLE_FILES
