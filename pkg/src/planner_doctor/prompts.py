"""Rendering of the diagnostic prompt sent to the language model.

The user prompt is an ordered list of tagged sections: ``instructions``,
``planner``, ``evaluation``, ``few_shots`` and then one ``feedback_<i>``
section per completed repair iteration. Bundles are immutable; feedback is
only ever appended.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evaluation import COMPONENT_NAMES, COMPONENTS, ComparisonReport, CostBreakdown, CostWeights
from .heuristic import FeatureInfo, list_features, parse_heuristic
from .primitives import parse_primitive_id

SECTION_ORDER = ("instructions", "planner", "evaluation", "few_shots")
RESPONSE_KEYS = ("diagnoses", "patched_heuristic", "motion_primitives_id")

RULE_OF_THUMB = (
    "merely adjusting the weighting or coefficients is often cumbersome and not very effective"
)

ALGORITHM_INTRO = (
    "The motion planner is an A* search over a lattice graph. Edges of the graph are motion "
    "primitives: short trajectories generated offline by forward-simulating a kinematic "
    "single-track vehicle model from sampled initial and final velocities and steering "
    "angles. Starting from the initial state, the planner repeatedly expands the open node "
    "with the lowest priority, which is the accumulated travel time of its path plus the "
    "value of the heuristic function. The first node popped from the queue that reaches the "
    "goal region is returned as the planned trajectory. Collision checking and goal checking "
    "are handled internally. The heuristic function and the motion primitives are the key "
    "components that determine the quality of the planned trajectory."
)

NAMING_CONVENTION = (
    "Motion primitives are referenced by IDs of the form "
    '"V_{v_min}_{v_max}_Vstep_{dv}_SA_{sa_min}_{sa_max}_SAstep_{dsa}_T_{tau}_Model_{model}". '
    "v_min and v_max bound the sampled velocities and dv is the velocity step (Vstep); sa_min "
    "and sa_max bound the sampled steering angles and dsa is the steering angle step (SAstep); "
    "tau is the duration of every primitive and model names the vehicle model. All values are "
    "in SI units. A smaller step gives a denser lattice with a higher branching factor."
)

DSL_DESCRIPTION = (
    "Heuristics are written as arithmetic expressions using +, -, *, / and parentheses over "
    "non-negative numeric constants and the features listed below. The functions min(a, b), "
    "max(a, b), if_reached_goal(a, b) and if_zero_velocity(a, b) are available; the last two "
    "return a when the current path segment reaches the goal (respectively the current "
    "velocity is zero) and b otherwise. Division by zero yields 1e6 and negative results are "
    "clamped to 0."
)


@dataclass(frozen=True)
class PromptTemplate:
    """Manually supplied prompt text."""

    algorithm_intro: str = ALGORITHM_INTRO
    rule_of_thumb: str = RULE_OF_THUMB


@dataclass(frozen=True)
class FewShotExample:
    input_heuristic: str
    diagnosis: str
    prescription: str
    output_heuristic: str

    def __post_init__(self):
        parse_heuristic(self.input_heuristic)
        parse_heuristic(self.output_heuristic)


DEFAULT_EXAMPLES = (
    FewShotExample(
        input_heuristic="orientation_to_goal_diff",
        diagnosis="the acceleration is not considered",
        prescription="add the acceleration cost to the heuristic function",
        output_heuristic="orientation_to_goal_diff + acceleration_cost",
    ),
    FewShotExample(
        input_heuristic="distance_to_goal",
        diagnosis="the heuristic ignores how fast the goal can be reached",
        prescription="divide the distance by the velocity and guard the standstill case",
        output_heuristic="if_zero_velocity(100, distance_to_goal / velocity)",
    ),
)

DEFAULT_PRIMITIVE_IDS = (
    "V_0.0_20.0_Vstep_1.0_SA_-1.066_1.066_SAstep_2.13_T_0.5_Model_BMW_320i",
    "V_0.0_20.0_Vstep_2.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i",
    "V_0.0_20.0_Vstep_4.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i",
)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user_sections: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "user_sections", tuple(tuple(s) for s in self.user_sections))
        rank = {tag: i for i, tag in enumerate(SECTION_ORDER)}
        last = -1
        feedback_seen = 0
        for tag, _ in self.user_sections:
            if tag.startswith("feedback_"):
                feedback_seen += 1
                if tag != f"feedback_{feedback_seen}":
                    raise ValueError(f"feedback sections out of order at {tag!r}")
                last = len(SECTION_ORDER)
                continue
            if tag not in rank:
                raise ValueError(f"unknown section tag {tag!r}")
            if rank[tag] <= last:
                raise ValueError(f"section {tag!r} out of order")
            last = rank[tag]

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(tag for tag, _ in self.user_sections)

    def section(self, tag: str) -> str:
        for t, text in self.user_sections:
            if t == tag:
                return text
        raise KeyError(tag)

    @property
    def feedback_count(self) -> int:
        return sum(1 for t in self.tags if t.startswith("feedback_"))

    def user_text(self) -> str:
        return assemble(self)

    def full_text(self) -> str:
        return f"{self.system}\n\n{assemble(self)}"


def assemble(bundle: PromptBundle) -> str:
    return "\n\n".join(text for _, text in bundle.user_sections)


def _fmt(value: float) -> str:
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


# --- section builders ---------------------------------------------------------


def build_system_prompt() -> str:
    keys = ", ".join(f'"{k}"' for k in RESPONSE_KEYS)
    return (
        "You are an expert in diagnosing and repairing motion planners for automated "
        "vehicles. You read a description of a search-based motion planner and of the "
        "trajectory it planned, identify the deficiencies that cause a poor objective value "
        "and repair the planner.\n"
        "Reply with a single JSON object and nothing else. It must contain exactly the keys "
        f"{keys}:\n"
        '- "diagnoses": a non-empty list of objects {"diagnosis": <text>, "prescription": <text>}\n'
        '- "patched_heuristic": the complete repaired heuristic expression\n'
        '- "motion_primitives_id": the ID of the motion primitives the repaired planner uses'
    )


def build_instructions(template: PromptTemplate = PromptTemplate()) -> str:
    return (
        "<Instructions>\n"
        "Diagnose why the planner below produces a trajectory with a high objective value and "
        "repair it so that the objective gets as close as possible to the target value. "
        "Provide both diagnoses and prescriptions: every diagnosis names one deficiency and "
        "its prescription states how to fix it. Then apply all prescriptions by returning the "
        "complete patched heuristic and the ID of the motion primitives to use. Only use the "
        "features, functions and motion primitive IDs listed in this prompt, and make sure "
        "the patched heuristic is a valid expression.\n"
        f"Keep in mind that {template.rule_of_thumb}."
    )


def describe_planner(
    config, catalog: Sequence[FeatureInfo] = None, template: PromptTemplate = PromptTemplate()
) -> str:
    catalog = list_features() if catalog is None else catalog
    feature_lines = "\n".join(f"{f.name}: {f.docstring}" for f in catalog)
    return (
        "<Motion Planner>\n"
        f"{template.algorithm_intro}\n\n"
        f"{DSL_DESCRIPTION}\n\n"
        "Current heuristic function:\n"
        f"{config.heuristic_text}\n\n"
        "Features used by heuristic functions:\n"
        f"{feature_lines}\n\n"
        f"{NAMING_CONVENTION}\n"
        f'The planner currently uses the motion primitives "{config.primitive_id_text}".'
    )


def describe_evaluation(
    breakdown: CostBreakdown, total: float, target: float, weights: CostWeights
) -> str:
    lines = ["<Planned Trajectory>", "The planned trajectory is evaluated with a weighted sum of cost components:"]
    for comp, w in zip(COMPONENTS, weights.as_tuple()):
        lines.append(
            f"- the cost for {COMPONENT_NAMES[comp]} is {_fmt(getattr(breakdown, comp))} (weight {_fmt(w)})"
        )
    lines.append(
        f"The total objective value is {_fmt(total)}, while the target value is {_fmt(target)}."
    )
    return "\n".join(lines)


def build_few_shots(
    catalog: Sequence[FeatureInfo] = None,
    examples: Sequence[FewShotExample] = DEFAULT_EXAMPLES,
    available_ids: Sequence[str] = DEFAULT_PRIMITIVE_IDS,
) -> str:
    catalog = list_features() if catalog is None else catalog
    for pid in available_ids:
        parse_primitive_id(pid)  # reject unknown formats before they reach the model
    parts = [
        "<Few-Shots>",
        "These pre-defined features can be used directly in the heuristic function:",
    ]
    parts += [f"{f.name} [{f.unit}]: {f.docstring}" for f in catalog]
    if examples:
        parts.append("\nExamples:")
        for ex in examples:
            parts += [
                "(input)",
                ex.input_heuristic,
                "(output)",
                f"Diagnosis: {ex.diagnosis}",
                f"Prescription: {ex.prescription}",
                ex.output_heuristic,
            ]
    parts.append("\nFeasible motion primitives with the same name format that you can directly use:")
    parts += [f'"{pid}",' for pid in available_ids]
    return "\n".join(parts)


def build_prompt(
    config,
    breakdown: CostBreakdown,
    total: float,
    target: float,
    weights: Optional[CostWeights] = None,
    *,
    few_shots: bool = True,
    examples: Sequence[FewShotExample] = DEFAULT_EXAMPLES,
    available_ids: Sequence[str] = DEFAULT_PRIMITIVE_IDS,
    template: PromptTemplate = PromptTemplate(),
) -> PromptBundle:
    """Full diagnostic description for a planner and its evaluated trajectory."""
    weights = weights or CostWeights()
    sections = [
        ("instructions", build_instructions(template)),
        ("planner", describe_planner(config, template=template)),
        ("evaluation", describe_evaluation(breakdown, total, target, weights)),
    ]
    if few_shots:
        sections.append(("few_shots", build_few_shots(examples=examples, available_ids=available_ids)))
    return PromptBundle(build_system_prompt(), tuple(sections))


# --- feedback -----------------------------------------------------------------


@dataclass(frozen=True)
class FeedbackRecord:
    kind: str  # "execution_error" or "evaluation"
    prior_diagnoses: tuple[tuple[str, str], ...]
    detail: str
    comparison: Optional[ComparisonReport] = None

    def __post_init__(self):
        object.__setattr__(self, "prior_diagnoses", tuple(tuple(p) for p in self.prior_diagnoses))
        if self.kind not in ("execution_error", "evaluation"):
            raise ValueError(f"unknown feedback kind {self.kind!r}")
        if not self.detail:
            raise ValueError("feedback detail must not be empty")

    @classmethod
    def execution_error(cls, prior_diagnoses, location: str, message: str) -> "FeedbackRecord":
        return cls("execution_error", tuple(prior_diagnoses), f"Error in {location}: {message}")

    @classmethod
    def evaluation(cls, prior_diagnoses, report: ComparisonReport) -> "FeedbackRecord":
        return cls("evaluation", tuple(prior_diagnoses), comparison_narrative(report), report)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "prior_diagnoses": [list(p) for p in self.prior_diagnoses],
            "detail": self.detail,
        }


def comparison_narrative(report: ComparisonReport) -> str:
    before, after = _fmt(report.total_before), _fmt(report.total_after)
    if report.improvement:
        verdict = (
            f"The objective value improved from {before} to {after} "
            f"(a decrease of {_fmt(100 * report.relative_decrement)}%)."
        )
    else:
        verdict = f"The objective value was not improved: it changed from {before} to {after}."
    changes = ", ".join(
        f"{COMPONENT_NAMES[c]} {'+' if d >= 0 else ''}{_fmt(d)}"
        for c, d in report.component_deltas.items()
    )
    return f"{verdict} Change per component: {changes}."


def add_feedback(bundle: PromptBundle, record: FeedbackRecord) -> PromptBundle:
    index = bundle.feedback_count + 1
    lines = [f"<Feedback {index}>"]
    if record.prior_diagnoses:
        lines.append("The previous diagnoses and prescriptions were:")
        lines += [f"- {d}: {p}" for d, p in record.prior_diagnoses]
    else:
        lines.append("The previous response contained no usable diagnoses.")
    if record.kind == "execution_error":
        lines.append("Applying the previous response failed.")
    else:
        lines.append("The repaired planner was executed and its trajectory evaluated.")
    lines.append(record.detail)
    lines.append("Use this feedback to improve your next diagnosis and repair.")
    return PromptBundle(bundle.system, bundle.user_sections + ((f"feedback_{index}", "\n".join(lines)),))
