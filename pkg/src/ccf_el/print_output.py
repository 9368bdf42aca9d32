import os

from .outputs import OutputBase, Report
from .render import init_environment, render


@OutputBase.register("print")
class PrintOutput(OutputBase):
    """Rendered report on stdout, or in ``?file=``"""

    def __init__(self, url, renv=None):
        super().__init__(url)
        self.renv = renv if renv is not None else init_environment()
        template = self.query_params.get("template", [None])[0]
        self.templates = [template] if template else None

    def target(self, report: Report):
        return self.filename

    def write(self, report: Report):
        rendered = render(self.renv, report, self.templates)
        with self.open_target(self.target(report)) as f:
            print(rendered, file=f)


@OutputBase.register("markdown")
class MarkdownOutput(PrintOutput):
    """Rendered report in ``?file=``, defaulting to ``<report name>.md`` in ``?dir=``"""

    def __init__(self, url, renv=None):
        super().__init__(url, renv)
        self.directory = self.directory or "."

    def target(self, report: Report):
        return self.filename or os.path.join(self.directory, f"{report.name}.md")
