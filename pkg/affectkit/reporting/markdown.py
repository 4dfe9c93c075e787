"""
Markdown Reporter

Renders a pipeline report as Markdown tables: one Valence/Arousal/Combined
row per fold plus the Average row, a method comparison, and AU F1 when
available.
"""

from pathlib import Path
from typing import Optional, Union

import structlog
from jinja2 import Environment, FileSystemLoader, TemplateNotFound

from ..engine import PipelineReport
from ..errors import ConfigurationError

DEFAULT_TEMPLATE = "report.md.j2"


def format_score(value: Optional[float], digits: int = 3) -> str:
    """Fixed-point score, or '-' when absent."""
    return "-" if value is None else f"{value:.{digits}f}"


class MarkdownReporter:
    """Renders PipelineReport objects with a Jinja2 template."""

    def __init__(self, template_dir: Optional[Union[str, Path]] = None):
        self.logger = structlog.get_logger(__name__)
        if template_dir:
            self.template_dir = Path(template_dir)
        else:
            self.template_dir = Path(__file__).parent.parent / "templates"

        self.env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["score"] = format_score

    def render(self, report: PipelineReport, template_name: str = DEFAULT_TEMPLATE) -> str:
        try:
            template = self.env.get_template(template_name)
        except TemplateNotFound as e:
            raise ConfigurationError(f"Report template not found: {template_name}",
                                     key="template", template_dir=str(self.template_dir)) from e
        return template.render(report=report)

    def write(self, report: PipelineReport, path: Union[str, Path],
              template_name: str = DEFAULT_TEMPLATE) -> Path:
        """Render and write the report; returns the written path."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(report, template_name), encoding="utf-8")
        self.logger.info("Report written", path=str(path), folds=len(report.folds),
                         methods=len(report.methods))
        return path
