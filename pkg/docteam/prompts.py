"""Prompt templates for every step in which a language model is asked something."""

from typing import TYPE_CHECKING, Mapping, Optional, Sequence

from docteam.agent import AgentSpec
from docteam.query import ComplexityLevel, Query

if TYPE_CHECKING:
    from docteam.solo import Exemplar

MCQ_INSTRUCTION = (
    "The following are multiple choice questions (with answers) about medical "
    "knowledge."
)

STEP_BY_STEP = (
    "Let's think step by step. Explain your reasoning first, then end with your "
    "answer in the format **Answer:** (X)."
)

ANSWER_FORMAT = (
    "Give your answer in the format **Answer:** (X) followed by a short reason."
)
CLOSED_ANSWER_FORMAT = (
    "Give your answer (yes, no or maybe) in the format **Answer:** yes."
)

CONFIDENCE_REQUEST = (
    "State your confidence 0-1 in your answer, in the format **Confidence:** 0.8."
)
RANKING_REQUEST = (
    "Rank all options from most to least likely, in the format "
    "**Ranking:** A > C > B > D."
)

COMPLEXITY_SYSTEM = (
    "You are a medical expert who conducts initial assessment and your job is to "
    "decide the difficulty/complexity of the medical query."
)

COMPLEXITY_LEVELS = (
    "1) low: a PCP or general physician can answer this simple medical knowledge "
    "checking question without relying heavily on consulting other specialists.\n"
    "2) moderate: a PCP or general physician can answer this question in consultation "
    "with other specialist in a team.\n"
    "3) high: Team of multi-departmental specialists can answer to the question which "
    "requires specialists consulting to another department (requires a lot of team "
    "effort to treat the case)."
)

RECRUITER_SYSTEM = (
    "You are an experienced medical expert who recruits a group of experts with "
    "diverse identity and ask them to discuss and solve the given medical query."
)

MODERATOR_SYSTEM = (
    "You are a medical expert moderator who reviews the discussion of a "
    "multidisciplinary team and helps the team reach a well-founded consensus."
)

DECIDER_SYSTEM = (
    "You are a final medical decision maker who reviews all opinions from different "
    "medical experts and makes the final decision."
)

REPORT_STEPS = (
    "1. Take careful and comprehensive consideration of the provided reports.\n"
    "2. Extract key knowledge from the reports.\n"
    "3. Derive a comprehensive and summarized analysis based on the extracted "
    "knowledge.\n"
    "4. Generate a refined and synthesized report based on your analysis."
)

_RECRUIT_EXAMPLE = (
    "1. Pediatrician - Specializes in the medical care of infants, children, and "
    "adolescents.\n"
    "2. Cardiologist - Focuses on the diagnosis and treatment of heart conditions.\n"
    "3. Pulmonologist - Specializes in the diagnosis and treatment of respiratory "
    "disorders.\n"
    "4. Neonatologist - Focuses on the care of newborn infants.\n"
    "5. Medical Geneticist - Specializes in the study of genes and hereditary "
    "conditions.\n"
    "Pulmonologist == Neonatologist == Medical Geneticist == Pediatrician > "
    "Cardiologist"
)

_RECRUIT_TEAMS_EXAMPLE = (
    "Group 1 - Initial Assessment Team\n"
    "Member 1: Emergency Physician (Lead) - Performs the first evaluation of the "
    "patient.\n"
    "Member 2: Radiologist - Interprets the imaging studies.\n"
    "Group 2 - Diagnostic Evidence Team\n"
    "Member 1: Pathologist (Lead) - Interprets laboratory and tissue findings.\n"
    "Member 2: Infectious Disease Specialist - Assesses infectious causes.\n"
    "Group 3 - Final Review & Decision Team\n"
    "Member 1: Internist (Lead) - Integrates all findings into a final decision.\n"
    "Member 2: Clinical Pharmacologist - Reviews treatment safety."
)


def format_options(options: Mapping[str, str]) -> str:
    return "\n".join(f"({letter}) {text}" for letter, text in options.items())


def answer_cue(query: Query) -> str:
    """The text a prompt ends with, so that the completion starts with the answer."""
    return "**Answer:**(" if query.options else "**Answer:**"


def format_question(
    query: Query, options: Optional[Mapping[str, str]] = None
) -> str:
    """
    Render a query as a question block.

    Args:
        query: The query.
        options: Options to show instead of those of the query, e.g. in shuffled
            order.

    Returns:
        The context (if any), question, and answer choices.
    """

    options = query.options if options is None else options
    parts = []

    if query.context:
        parts.append(f"**Context:** {query.context}")

    parts.append(f"**Question:** {query.question}")
    parts.append(format_options(options) if options else "(yes / no / maybe)")

    return "\n".join(parts)


def format_exemplar(exemplar: "Exemplar", with_rationale: bool) -> str:
    lines = [f"**Question:** {exemplar.question}"]

    if exemplar.options:
        lines.append(format_options(exemplar.options))

    if with_rationale and exemplar.rationale:
        lines.append(f"**Explanation:** {exemplar.rationale}")

    if exemplar.options:
        lines.append(f"**Answer:**({exemplar.answer})")
    else:
        lines.append(f"**Answer:** {exemplar.answer}")

    return "\n".join(lines)


def few_shot_prompt(
    query: Query,
    shots: Sequence["Exemplar"],
    chain_of_thought: bool = False,
    options: Optional[Mapping[str, str]] = None,
) -> str:
    """
    The single-agent multiple choice prompt.

    Args:
        query: The query to answer.
        shots: Worked examples to show first. May be empty.
        chain_of_thought: Whether to show rationales and ask for step by step
            reasoning.
        options: Options to show instead of those of the query.

    Returns:
        The prompt text.
    """

    blocks = [MCQ_INSTRUCTION]
    blocks += [format_exemplar(shot, chain_of_thought) for shot in shots]
    blocks.append(format_question(query, options))

    if chain_of_thought:
        blocks.append(STEP_BY_STEP)

    blocks.append(answer_cue(query))

    return "\n\n".join(blocks)


def refinement_prompt(
    query: Query, shots: Sequence["Exemplar"], reasoning_paths: Sequence[str]
) -> str:
    """The synthesis prompt that conditions on several sampled reasoning paths."""

    paths = "\n\n".join(
        f"Reasoning path {number}:\n{path}"
        for number, path in enumerate(reasoning_paths, start=1)
    )

    blocks = [MCQ_INSTRUCTION]
    blocks += [format_exemplar(shot, True) for shot in shots]
    blocks.append(format_question(query))
    blocks.append(
        "Below are several reasoning paths for this question. Consider them all, "
        "resolve their disagreements and give one refined answer.\n\n" + paths
    )
    blocks.append(answer_cue(query))

    return "\n\n".join(blocks)


def complexity_prompt(query: Query) -> str:
    return (
        "Now, given the medical query as below, you need to decide the "
        "difficulty/complexity of it:\n\n"
        f"{format_question(query)}\n\n"
        "Please indicate the difficulty/complexity of the medical query among below "
        f"options:\n{COMPLEXITY_LEVELS}\n\n**Answer:**("
    )


def recruit_prompt(query: Query, level: ComplexityLevel, n_max: int) -> str:
    """
    The prompt asking the recruiter for a roster that fits the complexity level.

    Args:
        query: The query to recruit for.
        level: The complexity level of the query.
        n_max: The maximum number of experts (per team, for ``HIGH``).

    Returns:
        The prompt text.
    """

    head = f"Here is the medical query:\n\n{format_question(query)}\n\n"

    if level is ComplexityLevel.LOW:
        return head + (
            "Recruit 1 expert, a primary care physician or the single specialist best "
            "suited to answer this question on their own. Answer in the format:\n"
            "1. Role - description\n\n"
            "Please answer in above format, and do not include your reason."
        )

    if level is ComplexityLevel.MODERATE:
        return head + (
            f"You can recruit up to {n_max} experts in different medical expertise. "
            "Considering the medical question and the options for the answer, what "
            "kind of experts will you recruit to better make an accurate answer?\n"
            "Also, you need to specify the communication structure between experts "
            "(e.g., Pulmonologist == Neonatologist == Medical Geneticist == "
            "Pediatrician > Cardiologist)\n\n"
            "For example, if you want to recruit five experts, you answer can be "
            f"like:\n{_RECRUIT_EXAMPLE}\n\n"
            "Please answer in above format, and do not include your reason."
        )

    return head + (
        "Organize integrated care teams to solve this query step by step. Start with "
        "an Initial Assessment Team and end with a Final Review & Decision Team. Each "
        f"team has up to {n_max} members, one of which is the lead.\n\n"
        f"For example:\n{_RECRUIT_TEAMS_EXAMPLE}\n\n"
        "Please answer in above format, and do not include your reason."
    )


def agent_system_prompt(agent: AgentSpec, in_team: bool = True) -> str:
    description = agent.description.rstrip(".") or "answers medical questions"
    prompt = f"You are a {agent.role} who {_lower_first(description)}."

    if in_team:
        prompt += " Your job is to collaborate with other medical experts in a team."

    return prompt


def _lower_first(text: str) -> str:
    return text[:1].lower() + text[1:]


def opinion_prompt(query: Query, extra: Sequence[str] = ()) -> str:
    """The first prompt an expert receives: the question, asking for an opinion."""

    answer_format = ANSWER_FORMAT if query.options else CLOSED_ANSWER_FORMAT

    return "\n\n".join([format_question(query), answer_format, *extra])


def interaction_prompt(
    query: Query,
    opinions: Sequence[str],
    agent_list: Sequence[str],
    feedback: Optional[str] = None,
) -> str:
    """
    The prompt for one turn in a team discussion.

    Args:
        query: The query under discussion.
        opinions: The messages the agent received since its last turn.
        agent_list: The roles of all agents in the team, in the order they are
            numbered.
        feedback: Feedback from the moderator, if any.

    Returns:
        The prompt text.
    """

    received = "\n".join(opinions) or "(no new opinions)"
    agents = ", ".join(
        f"Agent {number} ({role})" for number, role in enumerate(agent_list, start=1)
    )
    answer_format = ANSWER_FORMAT if query.options else CLOSED_ANSWER_FORMAT

    parts = []

    if feedback:
        parts.append(f"Feedback from the moderator:\n{feedback}")

    parts += [
        "Given the opinions from other medical agents in your team, please indicate "
        "whether you want to talk to any expert (yes/no). If not, provide your "
        f"opinion.\n{received}",
        f"Next, indicate the agent you want to talk to: {agents}",
        "Remind your medical expertise and leave your opinion to an expert you chose. "
        "Deliver your opinion once you are confident enough and in a way to convince "
        "other expert with a short reason.",
        answer_format,
    ]

    return "\n\n".join(parts)


def feedback_prompt(
    query: Query, log: str, roles: Sequence[str], addressee: Optional[str] = None
) -> str:
    """
    The prompt asking the moderator to review a round of discussion.

    Args:
        query: The query under discussion.
        log: The discussion so far.
        roles: The roles of all agents in the team.
        addressee: When set, ask for feedback to this role only.

    Returns:
        The prompt text.
    """

    head = (
        f"{format_question(query)}\n\nThe team has not reached consensus. Here is "
        f"the discussion so far:\n{log}\n\n"
    )

    if addressee is not None:
        return head + f"Give feedback to the {addressee} to help the team converge."

    headers = "\n".join(f"### {role}" for role in roles)

    return head + (
        "Review the discussion and give feedback to each expert. Start the feedback "
        f"for each expert on a new line with a header:\n{headers}"
    )


def final_decision_prompt(query: Query, inputs: str, evidence: str) -> str:
    """
    The prompt for the final decision.

    Args:
        query: The query to decide on.
        inputs: What the evidence is, e.g. ``"conversation history"``.
        evidence: The evidence itself.

    Returns:
        The prompt text.
    """

    return (
        f"{format_question(query)}\n\n"
        f"Given the {inputs}, please review the {inputs} and make the final answer "
        "to the question by majority voting or ensemble refinement.\n\n"
        f"{evidence}\n\n{answer_cue(query)}"
    )


def assessment_prompt(query: Query, team_name: str, prior_reports: str) -> str:
    prior = prior_reports or "(no earlier reports)"

    return (
        f"{format_question(query)}\n\n"
        f"Reports from earlier teams:\n{prior}\n\n"
        f"As a member of the {team_name}, give your assessment of the case, and "
        f"end with your answer.\n"
        f"{ANSWER_FORMAT if query.options else CLOSED_ANSWER_FORMAT}"
    )


def report_prompt(query: Query, team_name: str, assessments: str) -> str:
    return (
        f"{format_question(query)}\n\n"
        f"You lead the {team_name}. Given the assessments of the team members below, "
        f"please complete the following steps:\n{REPORT_STEPS}\n\n"
        f"Assessments:\n{assessments}"
    )


def format_reports(reports: Sequence[tuple[str, str]]) -> str:
    """Render ``(team name, report body)`` pairs as labelled blocks."""
    return "\n\n".join(f"[{name}]\n{body}" for name, body in reports)
