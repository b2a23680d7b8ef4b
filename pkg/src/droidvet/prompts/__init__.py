"""Versioned prompt templates, referenced by id from run configuration.

Templates use $NAME placeholders (string.Template) so JSON braces in
the template body never collide with substitution. These prompts are
tunable configuration, not behavioral contracts: the scripted test
backends do not depend on their wording.
"""

from __future__ import annotations

from importlib.resources import files
from string import Template

PROMPT_VERSION = "1"


def load_template(template_id: str) -> str:
    resource = files(__package__).joinpath(f"{template_id}.md")
    if not resource.is_file():
        raise KeyError(f"no prompt template {template_id!r}")
    return resource.read_text(encoding="utf-8")


def render_prompt(template_id: str, **substitutions: str) -> str:
    return Template(load_template(template_id)).safe_substitute(**substitutions)
