"""
Reporting Package

Markdown results tables rendered from Jinja2 templates.
"""

from .markdown import MarkdownReporter, format_score

__all__ = ["MarkdownReporter", "format_score"]
