from unittest.mock import MagicMock
from urllib.parse import urlparse

import pytest
from jinja2 import Environment, FunctionLoader

from ccf_el.print_output import MarkdownOutput, PrintOutput

from . import factories


class ReportTemplateLoader:
    def __init__(self):
        self.templates = {
            "estimate.md.j2": "Fit of {{ doc.model }}: kappa={{ doc.theta_hat.kappa }}",
            "short.md.j2": "{{ report.name }}",
        }

    def __call__(self, name):
        return self.templates.get(name)


@pytest.fixture
def renv():
    return Environment(loader=FunctionLoader(ReportTemplateLoader()))


def test_print_output_to_stdout(renv, capsys):
    output = PrintOutput(urlparse("print://"), renv=renv)
    output.write(factories.Report())
    assert capsys.readouterr().out == "Fit of VSK: kappa=0.91\n"
    assert output.written == []


def test_print_output_template_override(renv, capsys):
    output = PrintOutput(urlparse("print://?template=short.md.j2"), renv=renv)
    assert output.templates == ["short.md.j2"]
    output.write(factories.Report())
    assert capsys.readouterr().out == "estimate-VSK-el\n"


def test_print_output_to_file(renv, tmp_path):
    target = tmp_path / "report.md"
    PrintOutput(urlparse(f"print://?file={target}"), renv=renv).write(factories.Report())
    assert target.read_text() == "Fit of VSK: kappa=0.91\n"


def test_print_output_default_environment():
    output = PrintOutput(urlparse("print://"))
    assert "num" in output.renv.filters


def test_markdown_output_names_files_after_the_report(renv, tmp_path):
    output = MarkdownOutput(urlparse(f"markdown://?dir={tmp_path}"), renv=renv)
    output.write(factories.Report(name="estimate-CIR-el"))
    assert (tmp_path / "estimate-CIR-el.md").read_text().startswith("Fit of VSK")
    assert output.written == [str(tmp_path / "estimate-CIR-el.md")]


def test_markdown_output_renders_through_the_environment(tmp_path):
    renv = MagicMock()
    renv.get_template.return_value.render.return_value = "rendered"
    output = MarkdownOutput(urlparse(f"markdown://?file={tmp_path / 'fit.md'}"), renv=renv)
    output.write(factories.Report())
    renv.get_template.assert_called_once_with("estimate.md.j2")
    assert (tmp_path / "fit.md").read_text() == "rendered\n"
