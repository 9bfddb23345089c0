"""Block descent, key-element extraction and interaction planning."""

import pytest

from intentscan.dom import parse_html
from intentscan.intention import (
    BlockDecision,
    DecisionContext,
    ElementDecision,
    IntentionPath,
    NoInteractiveElements,
    ProviderFailure,
    dependency_direction,
    element_label,
    generate_interactions,
    identify_key_elements,
    is_destructive,
)
from intentscan.providers import HeuristicProvider
from intentscan.refine import compress_page

from conftest import CORPUS, FIXTURES


def load(name: str, url: str = "http://app.test/"):
    path = FIXTURES / name if not name.startswith("corpus/") else CORPUS / name[7:]
    return compress_page(parse_html(path.read_text(), url))


@pytest.fixture(scope="module")
def blog():
    return load("blog_page.html", "http://blog.test/post/7")


class TestLexicons:
    def test_destructive_phrases(self):
        assert is_destructive("Log out")
        assert is_destructive("Delete all comments")
        assert not is_destructive("View all comments")
        assert not is_destructive("Send")

    def test_dependency_direction(self):
        assert dependency_direction("Enable comments") == "enabling"
        assert dependency_direction("Send anonymously") == "disabling"
        assert dependency_direction("Gift wrapping") is None


class TestDescent:
    def test_path_descends_to_comment_form(self, blog):
        provider = HeuristicProvider(context_window=2500)
        path, key = identify_key_elements(blog, provider, "Comment")
        assert [s.label for s in path.steps] == ["Comment", "Comment sent"]
        assert path.steps[-1].token_estimate <= 2500 // 20
        assert sorted((e.tag, e.name) for e in key) == [
            ("button", "send"),
            ("textarea", "comment"),
        ]

    def test_large_window_stops_at_first_small_enough_block(self, blog):
        provider = HeuristicProvider(context_window=32768)
        path, _ = identify_key_elements(blog, provider, "Comment")
        assert len(path.steps) == 1
        assert path.steps[0].label == "Comment"
        assert path.steps[-1].token_estimate <= 32768 // 20

    def test_small_window_forces_deeper_recursion(self, blog):
        provider = HeuristicProvider(context_window=400)
        path, _ = identify_key_elements(blog, provider, "Comment")
        assert len(path.steps) >= 2
        assert path.steps[-1].token_estimate <= 400 // 20

    def test_extraction_block_never_exceeds_window_share(self, blog):
        for window in (400, 2500, 8192, 32768):
            provider = HeuristicProvider(context_window=window)
            path, _ = identify_key_elements(blog, provider, "Comment")
            last = path.steps[-1]
            threshold = window // 20
            # either small enough or proven indivisible
            from intentscan.segmentation import segment

            assert last.token_estimate <= threshold or segment(blog, last.node_id) == []

    def test_no_interactive_elements_raises(self):
        page = load("corpus/02_paragraph_runs.html")
        with pytest.raises(NoInteractiveElements):
            identify_key_elements(page, HeuristicProvider(), "anything")

    def test_out_of_range_block_choice_rejected(self, blog):
        class Broken:
            context_window = 32768
            defer_destructive = True

            def select_block(self, ctx, blocks):
                return BlockDecision(index=99)

            def select_elements(self, ctx, elements):
                return []

            def generate_value(self, ctx, element, history):
                return ""

        with pytest.raises(ProviderFailure):
            identify_key_elements(blog, Broken(), "Comment")

    def test_tested_elements_deplete_selection(self, blog):
        provider = HeuristicProvider(context_window=2500)
        _, key = identify_key_elements(blog, provider, "Comment")
        tested = frozenset(
            e.node_id for e in key
        ) | frozenset(
            n.node_id
            for n in blog.tree.nodes()
            if n.tag in ("input", "button", "textarea")
        )
        _, key_after = identify_key_elements(blog, provider, "Comment", tested=tested)
        assert [e for e in key_after if e.tag != "a"] == []


class TestElementLabels:
    def test_ancestor_label_text(self, blog):
        checkbox = next(
            n for n in blog.tree.nodes() if n.tag == "input" and n.attr("name") == "enable"
        )
        assert element_label(blog, checkbox) == "Enable comments"

    def test_label_for_reference(self):
        page = load("corpus/14_fieldset_dependency.html")
        author = next(
            n for n in page.tree.nodes() if n.tag == "input" and n.attr("name") == "author"
        )
        assert element_label(page, author) == "Your name"

    def test_placeholder_fallback(self, blog):
        textarea = next(n for n in blog.tree.nodes() if n.tag == "textarea")
        assert element_label(blog, textarea) == "Write a comment"


class TestPlans:
    def plan_for(self, page, goal, window=2500):
        provider = HeuristicProvider(context_window=window)
        path, key = identify_key_elements(page, provider, goal)
        return generate_interactions(page, key, path, provider)

    def test_comment_plan_checks_gate_then_fills_then_submits(self, blog):
        plan = self.plan_for(blog, "Comment")
        assert plan.kind == "submit"
        assert plan.form_method == "post"
        assert plan.form_action == "http://blog.test/comment"
        ops = [a.operation for a in plan.actions]
        assert ops == ["check", "fill", "submit"]
        names = dict(plan.payload())
        assert names["enable"] == "on"
        assert "automated note" in names["comment"]

    def test_disabling_gate_suppresses_dependent_field(self):
        page = load("corpus/14_fieldset_dependency.html", "http://fb.test/")
        plan = self.plan_for(page, "feedback")
        payload = dict(plan.payload())
        assert "anonymous" in payload
        assert "message" in payload
        assert "author" not in payload

    def test_disabled_field_without_enabler_omitted(self):
        page = load("corpus/21_checkout_form.html", "http://shop.test/")
        plan = self.plan_for(page, "checkout", window=32768)
        payload = dict(plan.payload())
        assert "email" in payload and "card" in payload
        assert "gift_note" not in payload

    def test_hidden_inputs_carried_into_payload(self):
        page = load("corpus/11_inline_handlers.html", "http://app.test/prefs")
        plan = self.plan_for(page, "Account settings", window=32768)
        payload = dict(plan.payload())
        assert payload["csrf"] == "abc123"
        assert "display_name" in payload

    def test_link_goal_produces_click_plan(self):
        page = load("corpus/06_nav_links.html", "http://site.test/")
        plan = self.plan_for(page, "Pricing", window=32768)
        assert plan.kind == "click"
        assert plan.target_url == "http://site.test/pricing"
        assert len(plan.actions) == 1

    def test_at_most_one_submit_and_fills_precede_it(self):
        for name in ("04_login_form.html", "13_select_options.html", "18_search_form.html"):
            page = load(f"corpus/{name}", "http://forms.test/")
            plan = self.plan_for(page, "form", window=32768)
            submits = [i for i, a in enumerate(plan.actions) if a.operation == "submit"]
            assert len(submits) == 1
            fills = [i for i, a in enumerate(plan.actions) if a.operation in ("fill", "check")]
            assert all(i < submits[0] for i in fills)

    def test_select_filled_with_first_real_option(self):
        page = load("corpus/13_select_options.html", "http://forms.test/")
        plan = self.plan_for(page, "shipping", window=32768)
        payload = dict(plan.payload())
        assert payload["country"] == "de"
        assert payload["speed"] == "std"

    def test_plan_is_self_contained_for_replay(self, blog):
        plan = self.plan_for(blog, "Comment")
        assert plan.form_action.startswith("http://")
        assert all(a.value is not None for a in plan.actions)

    def test_empty_key_elements_rejected(self, blog):
        with pytest.raises(NoInteractiveElements):
            generate_interactions(blog, [], IntentionPath(goal="x"), HeuristicProvider())


class TestDecisionContext:
    def test_path_labels_reach_provider(self, blog):
        seen = []

        class Spy(HeuristicProvider):
            def select_block(self, ctx, blocks):
                seen.append(ctx.path)
                return super().select_block(ctx, blocks)

        identify_key_elements(blog, Spy(context_window=2500), "Comment")
        assert seen[0] == ()
        assert seen[1] == ("Comment",)

    def test_value_history_accumulates(self, blog):
        histories = []

        class Spy(HeuristicProvider):
            def generate_value(self, ctx, element, history):
                histories.append(history)
                return super().generate_value(ctx, element, history)

        provider = Spy(context_window=2500)
        path, key = identify_key_elements(blog, provider, "Comment")
        generate_interactions(blog, key, path, provider)
        assert len(histories) >= 2
        assert len(histories[-1]) > len(histories[0])
