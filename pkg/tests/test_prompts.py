"""Prompt assembly tests.

Rendered prompts are frozen as golden snapshots; the structural rules
(instruction, then demonstrations in similarity order, then the target,
joined by blank lines) are asserted independently of the snapshots so a
deliberate template change only touches the goldens.
"""

import json

import pytest
from hypothesis import given, settings, strategies as st

from nl2sell.prompts import (
    InstructionSet,
    PromptKind,
    TemplateError,
    build_demand_generation_prompt,
    build_judge_prompt,
    build_multitask_inputs,
    build_predict_prompt,
    build_reasoning_completion_prompt,
    load_instructions,
)
from nl2sell.retrieval import REASONING_STEP_LABELS, top_k_scored
from nl2sell.sell import parse, print_sell

from golden_util import check_golden

DEMAND = "Women between 35 and 55"


def _demo_block_from(index, demo):
    lines = [f"Example {index}:", f"Demand: {demo['demand']}"]
    if demo["tags"]:
        lines.append("Tags: " + ", ".join(demo["tags"]))
    if demo["reasoning"] is not None:
        lines.append("Reasoning:")
        lines.append(demo["reasoning"])
    lines.append(f"Answer: {demo['answer']}")
    return "\n".join(lines)


# ---------------------------------------------------------------- instructions


class TestInstructions:
    def test_loads_packaged_defaults(self, instructions):
        assert isinstance(instructions, InstructionSet)
        assert instructions.language == "en"
        for name in ("predict", "answer_task", "reasoning_task",
                     "reasoning_completion", "demand_generation", "judge"):
            assert getattr(instructions, name).strip()

    def test_operator_slots_are_expanded(self, instructions):
        assert "Between" in instructions.predict
        assert "Belongs To, Not Belongs To" in instructions.predict
        assert "{numeric_operators}" not in instructions.predict

    def test_steps_slot_lists_the_four_labels(self, instructions):
        joined = ", ".join(REASONING_STEP_LABELS)
        assert joined in instructions.reasoning_task
        assert joined in instructions.reasoning_completion

    def test_multitask_instructions_share_preamble(self, instructions):
        a = instructions.answer_task.splitlines()
        r = instructions.reasoning_task.splitlines()
        assert a != r
        assert a[:-1] == r[:-1]  # same preamble lines
        assert a[-1] != r[-1]    # distinct task directives

    def test_custom_template_file(self, tmp_path):
        text = (
            "[language]\nzz\n"
            "[predict]\nP uses {steps}.\n"
            "[multitask_preamble]\nM\n"
            "[answer_directive]\nA\n"
            "[reasoning_directive]\nR\n"
            "[reasoning_completion]\nC\n"
            "[demand_generation]\nD\n"
            "[judge]\nJ\n"
        )
        f = tmp_path / "ins.txt"
        f.write_text(text, encoding="utf-8")
        ins = load_instructions(f)
        assert ins.language == "zz"
        assert ins.predict == "P uses " + ", ".join(REASONING_STEP_LABELS) + "."
        assert ins.answer_task == "M\nA"
        assert ins.reasoning_task == "M\nR"

    def test_missing_section_rejected(self, tmp_path):
        f = tmp_path / "ins.txt"
        f.write_text("[predict]\nonly this\n", encoding="utf-8")
        with pytest.raises(TemplateError, match="lacks sections"):
            load_instructions(f)

    def test_unknown_slot_rejected(self, tmp_path):
        body = "\n".join(f"[{s}]\nx" for s in (
            "predict", "multitask_preamble", "answer_directive",
            "reasoning_directive", "reasoning_completion",
            "demand_generation", "judge"))
        f = tmp_path / "ins.txt"
        f.write_text(body.replace("[judge]\nx", "[judge]\n{bogus}"), encoding="utf-8")
        with pytest.raises(TemplateError, match="unknown slot"):
            load_instructions(f)

    def test_text_before_first_header_rejected(self, tmp_path):
        f = tmp_path / "ins.txt"
        f.write_text("stray\n[predict]\nx\n", encoding="utf-8")
        with pytest.raises(TemplateError, match="before first section"):
            load_instructions(f)


# ---------------------------------------------------------------- predict


@pytest.fixture(scope="module")
def predict_bundle(library, catalog, embedder, instructions):
    return build_predict_prompt(DEMAND, library, catalog, embedder,
                                instructions, k=2, n=5)


class TestPredictPrompt:
    def test_golden(self, predict_bundle):
        check_golden("prompts/predict_k2_n5.txt", predict_bundle.rendered)

    def test_layout_is_instruction_demos_target(self, predict_bundle):
        bundle = predict_bundle
        blocks = [bundle.instruction]
        blocks += [_demo_block_from(i, d) for i, d in enumerate(bundle.demonstrations, 1)]
        blocks.append("Demand: {}\nTags: {}".format(
            bundle.target["demand"], ", ".join(bundle.target["tags"])))
        assert bundle.rendered == "\n\n".join(blocks)

    def test_demos_in_descending_similarity(self, predict_bundle, library, embedder):
        hits = top_k_scored(DEMAND, 2, library, embedder)
        assert [d["id"] for d in predict_bundle.demonstrations] == \
               [h.entry.entry_id for h in hits]
        sims = [r["similarity"] for r in predict_bundle.provenance["retrieved"]]
        assert sims == sorted(sims, reverse=True)

    def test_target_tag_count_follows_n(self, library, catalog, embedder, instructions):
        b = build_predict_prompt(DEMAND, library, catalog, embedder, instructions, k=1, n=3)
        assert len(b.target["tags"]) == 3
        big = build_predict_prompt(DEMAND, library, catalog, embedder, instructions,
                                   k=1, n=10_000)
        assert len(big.target["tags"]) == len(catalog.tags)

    def test_zero_shot_has_no_demonstrations(self, catalog, embedder, instructions):
        b = build_predict_prompt(DEMAND, None, catalog, embedder, instructions, k=0, n=3)
        assert b.demonstrations == ()
        assert b.provenance["retrieved"] == []
        assert b.rendered.startswith(b.instruction + "\n\n")
        assert "Example 1:" not in b.rendered

    def test_k_requires_library(self, catalog, embedder, instructions):
        with pytest.raises(ValueError, match="reasoning library"):
            build_predict_prompt(DEMAND, None, catalog, embedder, instructions, k=1)

    def test_negative_k_rejected(self, library, catalog, embedder, instructions):
        with pytest.raises(ValueError, match="k must be >= 0"):
            build_predict_prompt(DEMAND, library, catalog, embedder, instructions, k=-1)

    def test_deterministic(self, predict_bundle, library, catalog, embedder, instructions):
        again = build_predict_prompt(DEMAND, library, catalog, embedder,
                                     instructions, k=2, n=5)
        assert again.rendered == predict_bundle.rendered
        assert again.to_json_obj() == predict_bundle.to_json_obj()

    def test_json_shape(self, predict_bundle):
        obj = json.loads(json.dumps(predict_bundle.to_json_obj()))
        assert obj["kind"] == "predict"
        assert obj["provenance"]["config"]["embedder_version"] == "hash-ngram3-dim64-v1"
        assert all("block" not in d for d in obj["demonstrations"])
        assert obj["provenance"]["rendered_chars"] == len(predict_bundle.rendered)


class TestPredictBudget:
    def test_drops_lowest_similarity_first(self, library, catalog, embedder, instructions):
        free = build_predict_prompt(DEMAND, library, catalog, embedder, instructions,
                                    k=3, n=3)
        order = [d["id"] for d in free.demonstrations]
        # budget that fits the instruction+target+first demo but not all three
        target_len = len(free.rendered)
        tight = build_predict_prompt(DEMAND, library, catalog, embedder, instructions,
                                     k=3, n=3, max_chars=target_len - 1)
        assert len(tight.demonstrations) < 3
        kept = [d["id"] for d in tight.demonstrations]
        assert kept == order[: len(kept)]
        assert tight.provenance["dropped"] == order[len(kept):][::-1]
        assert len(tight.rendered) <= target_len - 1

    def test_target_survives_any_budget(self, library, catalog, embedder, instructions):
        b = build_predict_prompt(DEMAND, library, catalog, embedder, instructions,
                                 k=3, n=2, max_chars=10)
        assert b.demonstrations == ()
        assert b.rendered.endswith("Tags: " + ", ".join(b.target["tags"]))
        assert len(b.provenance["dropped"]) == 3

    def test_generous_budget_drops_nothing(self, library, catalog, embedder, instructions):
        b = build_predict_prompt(DEMAND, library, catalog, embedder, instructions,
                                 k=2, n=2, max_chars=1_000_000)
        assert b.provenance["dropped"] == []
        assert len(b.demonstrations) == 2

    @settings(max_examples=30, deadline=None)
    @given(budget=st.integers(min_value=1, max_value=4000))
    def test_budget_respected_or_exhausted(self, budget, library, catalog,
                                           embedder, instructions):
        b = build_predict_prompt(DEMAND, library, catalog, embedder, instructions,
                                 k=3, n=2, max_chars=budget)
        assert len(b.rendered) <= budget or b.demonstrations == ()


# ---------------------------------------------------------------- multitask


@pytest.fixture(scope="module")
def pair(library, catalog, embedder, instructions):
    return build_multitask_inputs(DEMAND, library, catalog, embedder,
                                  instructions, k=1, n=3)


class TestMultitaskInputs:
    def test_goldens(self, pair):
        answer, reasoning = pair
        check_golden("prompts/multitask_answer_k1_n3.txt", answer.rendered)
        check_golden("prompts/multitask_reasoning_k1_n3.txt", reasoning.rendered)

    def test_kinds(self, pair):
        assert pair[0].kind is PromptKind.MULTITASK_ANSWER
        assert pair[1].kind is PromptKind.MULTITASK_REASONING

    def test_pair_differs_only_in_instruction(self, pair):
        answer, reasoning = pair
        assert answer.instruction != reasoning.instruction
        assert answer.demonstrations == reasoning.demonstrations
        assert answer.target == reasoning.target
        a_body = answer.rendered[len(answer.instruction):]
        r_body = reasoning.rendered[len(reasoning.instruction):]
        assert a_body == r_body

    def test_demonstrations_include_reasoning_by_default(self, pair):
        answer, _ = pair
        assert all(d["reasoning"] for d in answer.demonstrations)
        assert "Reasoning:" in answer.rendered
        assert answer.provenance["config"]["include_reasoning"] is True

    def test_reasoning_ablated_variant(self, library, catalog, embedder, instructions):
        answer, reasoning = build_multitask_inputs(
            DEMAND, library, catalog, embedder, instructions,
            k=1, n=3, include_reasoning=False)
        check_golden("prompts/multitask_answer_k1_n3_noreason.txt", answer.rendered)
        for b in (answer, reasoning):
            assert all(d["reasoning"] is None for d in b.demonstrations)
            assert "Reasoning:" not in b.rendered
            assert b.provenance["config"]["include_reasoning"] is False

    def test_ablation_touches_only_demo_reasoning(self, pair, library, catalog,
                                                  embedder, instructions):
        with_r = pair[0]
        without_r, _ = build_multitask_inputs(DEMAND, library, catalog, embedder,
                                              instructions, k=1, n=3,
                                              include_reasoning=False)
        assert with_r.instruction == without_r.instruction
        assert with_r.target == without_r.target
        assert [d["id"] for d in with_r.demonstrations] == \
               [d["id"] for d in without_r.demonstrations]


# ------------------------------------------------------- reasoning completion


@pytest.fixture(scope="module")
def rc_bundle(library, instructions):
    seeds = [(e.demand, e.reasoning, e.sell) for e in library.entries[:2]]
    target = ("Frequent travelers with gold status",
              "(Trips per Year#Not Less Than#12) AND (Loyalty Tier#Belongs To#Gold)")
    return build_reasoning_completion_prompt(seeds, target, instructions)


class TestReasoningCompletion:
    def test_golden(self, rc_bundle):
        check_golden("prompts/reasoning_completion.txt", rc_bundle.rendered)

    def test_target_ends_awaiting_reasoning(self, rc_bundle):
        assert rc_bundle.rendered.endswith(
            "Demand: Frequent travelers with gold status\n"
            "Answer: (Trips per Year#Not Less Than#12) AND (Loyalty Tier#Belongs To#Gold)\n"
            "Reasoning:")

    def test_seed_blocks_carry_reasoning_and_answer(self, rc_bundle, library):
        for e in library.entries[:2]:
            assert e.reasoning in rc_bundle.rendered
            assert f"Answer: {e.sell}" in rc_bundle.rendered

    def test_empty_seeds_rejected(self, instructions):
        with pytest.raises(ValueError, match="seed example"):
            build_reasoning_completion_prompt([], ("d", "(a#Equal To#1)"), instructions)


# --------------------------------------------------------- demand generation


@pytest.fixture(scope="module")
def dg_bundle(library, instructions):
    pairs = [(e.demand, e.sell) for e in library.entries[:2]]
    sell = parse("( Age # Between # 35 , 55 ) AND ( Gender # Belongs To # Female )")
    return build_demand_generation_prompt(pairs, sell, instructions)


class TestDemandGeneration:
    def test_golden(self, dg_bundle):
        check_golden("prompts/demand_generation.txt", dg_bundle.rendered)

    def test_target_sell_is_canonical(self, dg_bundle):
        canonical = "(Age#Between#35,55) AND (Gender#Belongs To#Female)"
        assert dg_bundle.target["sell"] == canonical
        assert dg_bundle.rendered.endswith(f"SELL: {canonical}\nDemand:")
        assert print_sell(parse(dg_bundle.target["sell"])) == dg_bundle.target["sell"]

    def test_example_pairs_render_sell_then_demand(self, dg_bundle, library):
        e = library.entries[0]
        assert f"SELL: {e.sell}\nDemand: {e.demand}" in dg_bundle.rendered

    def test_empty_examples_rejected(self, instructions):
        with pytest.raises(ValueError, match="example pair"):
            build_demand_generation_prompt([], parse("(a#Equal To#1)"), instructions)


# ------------------------------------------------------------------- judge


class TestJudgePrompt:
    RUBRIC = [
        {"demand": "Dog owners", "prediction": "(Pet#Belongs To#Dog)",
         "reference": "(Pet#Belongs To#Dog)", "score": 10},
        {"demand": "Dog owners", "prediction": "(Pet#Belongs To#Cat)",
         "reference": "(Pet#Belongs To#Dog)", "score": 2},
    ]

    @pytest.fixture()
    def bundle(self, instructions):
        return build_judge_prompt(
            "Young dog owners",
            "(Age#Less Than#30) AND (Pet#Belongs To#Dog)",
            "(Age#Not Greater Than#29) AND (Pet#Belongs To#Dog)",
            self.RUBRIC, instructions)

    def test_golden(self, bundle):
        check_golden("prompts/judge.txt", bundle.rendered)

    def test_target_ends_awaiting_score(self, bundle):
        assert bundle.rendered.endswith(
            "Demand: Young dog owners\n"
            "Predicted: (Age#Less Than#30) AND (Pet#Belongs To#Dog)\n"
            "Reference: (Age#Not Greater Than#29) AND (Pet#Belongs To#Dog)\n"
            "Score:")

    def test_rubric_blocks_carry_scores(self, bundle):
        assert "Score: 10" in bundle.rendered
        assert "Score: 2" in bundle.rendered
        assert [d["answer"] for d in bundle.demonstrations] == ["10", "2"]

    def test_no_rubric_is_allowed(self, instructions):
        b = build_judge_prompt("d", "(a#Equal To#1)", "(a#Equal To#1)", [], instructions)
        assert b.demonstrations == ()
        assert b.rendered == b.instruction + "\n\n" + (
            "Demand: d\nPredicted: (a#Equal To#1)\nReference: (a#Equal To#1)\nScore:")
