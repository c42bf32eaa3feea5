import pytest

from nerforge.audit.loop import (
    IterationReport,
    check_convergence,
    enqueue_conflicts,
    merge_resolved,
)
from nerforge.audit.store import (
    AlreadyResolvedError,
    AuditError,
    AuditStore,
    DuplicateAuditorError,
    InvalidTagsError,
    UnknownItemError,
    VersionConflictError,
)
from nerforge.corpus import LabeledSentence, NER_LABELS

T_PER = ["B-PER", "O"]
T_LOC = ["B-LOC", "O"]
T_ORG = ["B-ORG", "O"]


def idx(labels):
    return tuple(NER_LABELS.index(l) for l in labels)


def fresh_item(store=None):
    store = store or AuditStore()
    item = store.enqueue("s:0", ("Ali", "makan"), idx(T_PER), idx(T_LOC))
    return store, item


class TestStateMachine:
    def test_enqueue_pending(self):
        _, item = fresh_item()
        assert item.status == "pending"
        assert item.disagreement_count() == 1

    def test_single_decision(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER)
        assert item.status == "one_decision"

    def test_two_agreeing_resolve(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER)
        store.record_decision(item.item_id, "aud2", T_PER)
        assert item.status == "resolved"
        assert item.resolution == idx(T_PER)

    def test_two_disagreeing_conflict_then_majority(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER)
        store.record_decision(item.item_id, "aud2", T_LOC)
        assert item.status == "conflicted"
        store.record_decision(item.item_id, "aud3", T_PER)
        assert item.status == "resolved"
        assert item.resolution == idx(T_PER)

    def test_three_all_different_escalates(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER)
        store.record_decision(item.item_id, "aud2", T_LOC)
        store.record_decision(item.item_id, "aud3", T_ORG)
        assert item.status == "conflicted"
        assert item.escalated
        store.override_resolution(item.item_id, T_ORG)
        assert item.status == "resolved"
        assert item.resolution == idx(T_ORG)

    def test_override_requires_escalation(self):
        store, item = fresh_item()
        with pytest.raises(AuditError):
            store.override_resolution(item.item_id, T_PER)

    def test_duplicate_auditor(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER)
        with pytest.raises(DuplicateAuditorError):
            store.record_decision(item.item_id, "aud1", T_LOC)

    def test_already_resolved(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER)
        store.record_decision(item.item_id, "aud2", T_PER)
        with pytest.raises(AlreadyResolvedError):
            store.record_decision(item.item_id, "aud3", T_LOC)

    def test_invalid_tags(self):
        store, item = fresh_item()
        with pytest.raises(InvalidTagsError):
            store.record_decision(item.item_id, "aud1", ["B-XXX", "O"])
        with pytest.raises(InvalidTagsError):
            store.record_decision(item.item_id, "aud1", ["O"])  # wrong length
        with pytest.raises(InvalidTagsError):
            store.record_decision(item.item_id, "aud1", ["O", "I-PER"])  # bad BIO2
        assert item.status == "pending"  # rejected calls left no trace

    def test_unknown_item(self):
        store, _ = fresh_item()
        with pytest.raises(UnknownItemError):
            store.record_decision("item-999999", "aud1", T_PER)

    def test_version_conflict(self):
        store, item = fresh_item()
        store.record_decision(item.item_id, "aud1", T_PER, expected_version=0)
        with pytest.raises(VersionConflictError):
            store.record_decision(item.item_id, "aud2", T_PER, expected_version=0)
        store.record_decision(item.item_id, "aud2", T_PER, expected_version=item.version)
        assert item.status == "resolved"

    def test_status_filter(self):
        store, item = fresh_item()
        assert [i.item_id for i in store.items("pending")] == [item.item_id]
        assert store.items("resolved") == []
        with pytest.raises(ValueError):
            store.items("bogus")


class TestPersistence:
    def test_replay_reconstructs_state(self, tmp_path):
        path = tmp_path / "audit.log"
        store = AuditStore(path)
        item = store.enqueue("s:0", ("Ali", "makan"), idx(T_PER), idx(T_LOC))
        store.record_decision(item.item_id, "aud1", T_PER)
        store.record_decision(item.item_id, "aud2", T_LOC)
        store.append_report({"iteration": 0, "disagreement_rate": 0.5})
        store.close()

        reopened = AuditStore(path)
        copy = reopened.get(item.item_id)
        assert copy.status == "conflicted"
        assert [d.auditor_id for d in copy.decisions] == ["aud1", "aud2"]
        assert copy.version == item.version
        assert reopened.reports == [{"iteration": 0, "disagreement_rate": 0.5}]
        reopened.record_decision(item.item_id, "aud3", T_LOC)
        assert reopened.get(item.item_id).status == "resolved"
        reopened.close()

    def test_replay_clone_at_every_acknowledged_point(self):
        store, item = fresh_item()
        operations = [
            ("aud1", T_PER),
            ("aud2", T_LOC),
            ("aud3", T_PER),
        ]
        for auditor, tags in operations:
            store.record_decision(item.item_id, auditor, tags)
            clone = store.replay_clone()
            original = store.get(item.item_id)
            copy = clone.get(item.item_id)
            assert copy.status == original.status
            assert copy.resolution == original.resolution
            assert copy.version == original.version
            assert [d.tags for d in copy.decisions] == [d.tags for d in original.decisions]

    def test_foreign_file_rejected(self, tmp_path):
        path = tmp_path / "junk.log"
        path.write_text('{"schema": "something-else"}\n')
        with pytest.raises(AuditError):
            AuditStore(path)


def sent(sid, tokens, labels, provenance="external"):
    return LabeledSentence(sid, tuple(tokens), idx(labels), provenance=provenance)


class TestEnqueueConflicts:
    def test_no_disagreements(self):
        store = AuditStore()
        data = [sent("s:0", ("a", "b"), T_PER)]
        assert enqueue_conflicts(store, data, [idx(T_PER)]) == []

    def test_items_carry_both_sequences(self):
        store = AuditStore()
        data = [sent(f"s:{i}", ("a", "b"), T_PER) for i in range(3)]
        items = enqueue_conflicts(store, data, [idx(T_LOC)] * 3)
        assert len(items) == 3
        assert items[0].stored_tags == idx(T_PER)
        assert items[0].predicted_tags == idx(T_LOC)
        assert all(i.status == "pending" for i in items)

    def test_resolved_sentence_not_reentered_when_model_agrees(self):
        store = AuditStore()
        data = [sent("s:0", ("a", "b"), T_PER)]
        items = enqueue_conflicts(store, data, [idx(T_LOC)])
        store.record_decision(items[0].item_id, "a1", T_LOC)
        store.record_decision(items[0].item_id, "a2", T_LOC)
        # dataset not merged yet: stored still differs, but prediction matches resolution
        assert enqueue_conflicts(store, data, [idx(T_LOC)]) == []

    def test_resolved_sentence_reenters_on_new_disagreement(self):
        store = AuditStore()
        data = [sent("s:0", ("a", "b"), T_PER)]
        items = enqueue_conflicts(store, data, [idx(T_LOC)])
        store.record_decision(items[0].item_id, "a1", T_LOC)
        store.record_decision(items[0].item_id, "a2", T_LOC)
        merged = merge_resolved(data, store.items("resolved"))
        new_items = enqueue_conflicts(store, merged, [idx(T_ORG)])
        assert len(new_items) == 1

    def test_open_item_not_duplicated(self):
        store = AuditStore()
        data = [sent("s:0", ("a", "b"), T_PER)]
        enqueue_conflicts(store, data, [idx(T_LOC)])
        assert enqueue_conflicts(store, data, [idx(T_LOC)]) == []
        assert len(store.items()) == 1


class TestMerge:
    def test_zero_items_unchanged(self):
        data = [sent("s:0", ("a", "b"), T_PER)]
        assert merge_resolved(data, []) == data

    def test_one_resolution_changes_one_sentence(self):
        store = AuditStore()
        data = [sent("s:0", ("a", "b"), T_PER), sent("s:1", ("c", "d"), T_PER)]
        items = enqueue_conflicts(store, data, [idx(T_LOC), idx(T_PER)])
        store.record_decision(items[0].item_id, "a1", T_LOC)
        store.record_decision(items[0].item_id, "a2", T_LOC)
        merged = merge_resolved(data, store.items("resolved"))
        assert merged[0].ner_tags == idx(T_LOC)
        assert merged[0].provenance == "audited"
        assert merged[1] == data[1]

    def test_merge_idempotent_and_token_preserving(self):
        store = AuditStore()
        data = [sent("s:0", ("a", "b"), T_PER)]
        items = enqueue_conflicts(store, data, [idx(T_LOC)])
        store.record_decision(items[0].item_id, "a1", T_LOC)
        store.record_decision(items[0].item_id, "a2", T_LOC)
        once = merge_resolved(data, store.items("resolved"))
        twice = merge_resolved(once, store.items("resolved"))
        assert once == twice
        assert once[0].tokens == data[0].tokens


class TestConvergence:
    def report(self, rate, iteration=0):
        return IterationReport(iteration, None, 0, rate, 0, False)

    def test_zero_rate_converges(self):
        assert check_convergence([self.report(0.0)], epsilon=1e-9, max_iters=10)

    def test_not_converged(self):
        history = [self.report(0.5, 0), self.report(0.05, 1)]
        assert not check_convergence(history, epsilon=0.01, max_iters=10)

    def test_max_iters_forces_stop(self):
        history = [self.report(0.9, i) for i in range(3)]
        assert check_convergence(history, epsilon=0.01, max_iters=3)

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            check_convergence([], 0.1, 5)
