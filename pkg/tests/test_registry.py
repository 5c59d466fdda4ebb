import json

import numpy as np
import pytest

from laminar.behaviors import describe
from laminar.dataflow import PEDescriptor
from laminar.errors import DuplicateUser, InvalidCredentials, NotFound, Unauthorized
from laminar.registry import Registry, content_digest, hash_password, verify_password
from laminar.showcase import IsPrime, NumberProducer, demo_scenario, is_prime_graph


@pytest.fixture
def two_users(registry):
    registry.register_user("zz46", "password")
    registry.register_user("rf208", "secret")
    return registry


def test_register_and_login(registry):
    rec = registry.register_user("zz46", "password")
    assert rec.to_api() == {"userId": 1, "userName": "zz46"}
    token = registry.authenticate("zz46", "password")
    assert registry.user_for_token(token) == "zz46"


def test_duplicate_user(registry):
    registry.register_user("zz46", "password")
    with pytest.raises(DuplicateUser):
        registry.register_user("zz46", "other")


def test_bad_credentials(registry):
    registry.register_user("zz46", "password")
    with pytest.raises(InvalidCredentials):
        registry.authenticate("zz46", "wrong")
    with pytest.raises(InvalidCredentials):
        registry.authenticate("nobody", "password")
    with pytest.raises(InvalidCredentials):
        registry.register_user("", "x")


def test_unknown_and_expired_tokens():
    reg = Registry(pbkdf2_iterations=1000, token_ttl=-1)
    reg.register_user("u", "pw")
    token = reg.authenticate("u", "pw")
    with pytest.raises(Unauthorized):
        reg.user_for_token(token)
    with pytest.raises(Unauthorized):
        reg.user_for_token("nope")
    with pytest.raises(Unauthorized):
        reg.user_for_token(None)


def test_password_digest_is_salted():
    a, b = hash_password("pw", 1000), hash_password("pw", 1000)
    assert a != b and a.startswith("pbkdf2_sha256$1000$")
    assert verify_password("pw", a) and not verify_password("px", a)
    assert not verify_password("pw", "garbage")


def test_add_and_get_pe(two_users):
    rec = two_users.add_pe("zz46", describe(NumberProducer), "Random numbers producer")
    assert rec.pe_id == 1
    assert two_users.get_pe("zz46", 1) is rec
    assert two_users.get_pe("zz46", "numberproducer") is rec
    assert rec.source == describe(NumberProducer).source
    assert rec.description == "Random numbers producer"
    assert rec.pe_imports == ["random"]


def test_description_is_summarized_when_absent(two_users):
    rec = two_users.add_pe("zz46", PEDescriptor.producer("P", source="# Emits a tick\nclass P: pass\n"))
    assert rec.description == "Emits a tick"


def test_dedup_two_owners_one_record(two_users):
    a = two_users.add_pe("zz46", describe(IsPrime))
    b = two_users.add_pe("rf208", describe(IsPrime))
    assert a is b and len(two_users.pes) == 1
    assert sorted(two_users.user_pes) == [(1, 1), (2, 1)]
    out = two_users.remove_pe("zz46", a.pe_id)
    assert out == {"peId": 1, "peName": "IsPrime", "recordDeleted": False}
    assert 1 in two_users.pes
    assert two_users.get_pe("rf208", 1) is a
    with pytest.raises(NotFound):
        two_users.get_pe("zz46", 1)
    assert two_users.remove_pe("rf208", "IsPrime")["recordDeleted"] is True
    assert two_users.pes == {}


def test_same_name_different_source_is_new_record(two_users):
    a = two_users.add_pe("zz46", PEDescriptor.producer("P", source="class P: pass\n"))
    b = two_users.add_pe("zz46", PEDescriptor.producer("P", source="class P:\n    x = 1\n"))
    assert a.pe_id != b.pe_id
    assert a.digest == content_digest(a.source)


def test_repeat_registration_is_idempotent(two_users):
    a = two_users.add_pe("zz46", describe(IsPrime))
    b = two_users.add_pe("zz46", describe(IsPrime))
    assert a is b and two_users.user_pes == [(1, 1)]


def test_remove_unknown_pe(two_users):
    with pytest.raises(NotFound):
        two_users.remove_pe("zz46", 99)
    two_users.add_pe("zz46", describe(IsPrime))
    two_users.remove_pe("zz46", 1)
    with pytest.raises(NotFound):
        two_users.remove_pe("zz46", 1)


def test_privacy(two_users):
    two_users.add_pe("zz46", describe(IsPrime))
    assert two_users.pes_of("rf208") == []
    with pytest.raises(NotFound):
        two_users.get_pe("rf208", "IsPrime")
    with pytest.raises(Unauthorized):
        two_users.pes_of("ghost")


def test_workflow_registration_links_pes(two_users):
    wf = two_users.add_workflow("zz46", is_prime_graph())
    assert wf.entry_point == "isPrime"
    names = [p.pe_name for p in two_users.pes_by_workflow("zz46", "isPrime")]
    assert names == ["NumberProducer", "IsPrime", "PrintPrime"]
    g = two_users.get_workflow("zz46", wf.workflow_id).graph()
    assert g.to_json() == {**is_prime_graph().to_json(), "name": "isPrime"}


def test_entry_point_collision_gets_suffix(two_users):
    a = two_users.add_workflow("zz46", is_prime_graph())
    b = two_users.add_workflow("rf208", is_prime_graph())
    c = two_users.add_workflow("zz46", is_prime_graph())
    assert [a.entry_point, b.entry_point, c.entry_point] == ["isPrime", "isPrime-2", "isPrime-3"]
    assert two_users.get_workflow("zz46", "isPrime-3") is c
    assert two_users.get_workflow("zz46", "isPrime") is a


def test_demo_scenario_ids(registry):
    registry.register_user("zz46", "pw")
    demo_scenario(registry)
    assert registry.get_workflow("zz46", "isPrime").workflow_id == 2
    listing = registry.list_all("zz46")
    assert len(listing["pes"]) == 22 and len(listing["workflows"]) == 5


def test_link_idempotent(two_users):
    wf = two_users.add_workflow("zz46", is_prime_graph())
    extra = two_users.add_pe("zz46", PEDescriptor.consumer("Extra", source="class Extra: pass\n"))
    first = two_users.link_pe_workflow("zz46", wf.workflow_id, extra.pe_id)
    second = two_users.link_pe_workflow("zz46", wf.workflow_id, extra.pe_id)
    assert first["created"] and not second["created"]
    assert two_users.workflow_pes.count((wf.workflow_id, extra.pe_id)) == 1
    with pytest.raises(NotFound):
        two_users.link_pe_workflow("zz46", wf.workflow_id, 999)


def test_remove_workflow(two_users):
    wf = two_users.add_workflow("zz46", is_prime_graph())
    out = two_users.remove_workflow("zz46", "isprime")
    assert out == {"workflowId": wf.workflow_id, "entryPoint": "isPrime", "recordDeleted": True}
    assert all(w != wf.workflow_id for w, _ in two_users.workflow_pes)
    with pytest.raises(NotFound):
        two_users.remove_workflow("zz46", wf.workflow_id)


def test_embeddings_are_unit_vectors(registry):
    registry.register_user("zz46", "pw")
    demo_scenario(registry)
    for rec in registry.pes_of("zz46"):
        for v in (rec.desc_embedding, rec.code_embedding):
            assert v.shape == (256,)
            assert np.isclose(np.linalg.norm(v), 1.0)


def test_persistence_round_trip_bit_exact(tmp_path):
    path = tmp_path / "store.json"
    reg = Registry(path=path, pbkdf2_iterations=1000)
    reg.register_user("zz46", "password")
    reg.register_user("rf208", "secret")
    demo_scenario(reg)
    reg.add_pe("rf208", describe(IsPrime))
    again = Registry.load(path, pbkdf2_iterations=1000)
    assert again.pes == reg.pes
    assert again.workflows == reg.workflows
    assert again.user_pes == reg.user_pes and again.workflow_pes == reg.workflow_pes
    assert again.to_document() == reg.to_document()
    # ids continue where the old store stopped
    rec = again.add_pe("zz46", PEDescriptor.producer("Fresh", source="class Fresh: pass\n"))
    assert rec.pe_id == max(reg.pes) + 1
    # credentials survive, sessions do not
    again.authenticate("zz46", "password")


def test_saved_file_is_json_and_written_atomically(tmp_path):
    path = tmp_path / "store.json"
    reg = Registry(path=path, pbkdf2_iterations=1000)
    reg.register_user("u", "pw")
    assert json.loads(path.read_text())["users"][0]["userName"] == "u"
    assert [p.name for p in tmp_path.iterdir()] == ["store.json"]


def test_registry_threads_do_not_lose_updates(registry):
    import threading
    registry.register_user("u", "pw")

    def worker(k):
        for i in range(10):
            registry.add_pe("u", PEDescriptor.producer(f"P{k}_{i}", source=f"class P{k}_{i}: pass\n"))

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(registry.pes_of("u")) == 40
    assert sorted(registry.pes) == list(range(1, 41))
