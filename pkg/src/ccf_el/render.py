import logging
import os
from typing import Optional, Sequence, Union

from jinja2 import Environment, FileSystemLoader, select_autoescape

from . import jinja2_ext
from .outputs import Report

_logger = logging.getLogger(__name__)

TEMPLATES_DIR = os.path.join(os.path.dirname(__file__), "templates")
FALLBACK_TEMPLATE = "generic.md.j2"

SearchPath = Union[str, os.PathLike, Sequence[Union[str, os.PathLike]]]


def init_environment(search_path: Optional[SearchPath] = None, env_globals: Optional[dict] = None) -> Environment:
    env = Environment(
        loader=FileSystemLoader(search_path or TEMPLATES_DIR),
        autoescape=select_autoescape(disabled_extensions=("md.j2",), default_for_string=False),
        keep_trailing_newline=True,
    )
    env.globals.update(env_globals or {})
    jinja2_ext.add_filters(env)
    jinja2_ext.add_tests(env)
    return env


def template_for(report: Report):
    return [f"{report.kind}.md.j2", FALLBACK_TEMPLATE]


def render(env: Environment, report: Report, templates=None):
    if templates is None:
        templates = template_for(report)
    if isinstance(templates, str):
        templates = [templates]

    for template_name in templates:
        try:
            template = env.get_template(template_name)
            return template.render(report=report, doc=report.document, tables=report.tables)
        except Exception:
            _logger.warning(f"Failed to render report {report.name} with template '{template_name}'")
            continue
    else:
        raise RuntimeError(f"Failed to render all provided templates: {templates}")
