"""账本、合约与访问控制"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from mecco.core.errors import AuthorizationError, DecodeError, DomainError
from mecco.features.chain.contract import (
    AccessManager,
    contract_add_md,
    contract_delete_md,
    penalty_counts,
    policy_list,
    rebuild_policy_table,
    verify_request,
)
from mecco.features.chain.crypto import digest
from mecco.features.chain.ledger import Ledger, TransactionPool, mine_block, verify_chain
from mecco.features.chain.models import (
    AccessResult,
    AccessVerdict,
    Block,
    ChainConfig,
    PolicyTable,
    Transaction,
    TxKind,
)
from mecco.features.chain.service import (
    build_deregistration_tx,
    build_offload_tx,
    build_registration_tx,
    get_sender_public_key,
    new_account,
)
from mecco.features.chain.storage import MAGIC, append_blocks, load_ledger, save_ledger

PAYLOAD = digest(b"task", b"0")


@pytest.fixture
def admin():
    return new_account(0, role="admin")


@pytest.fixture
def ledger():
    return Ledger.create(ChainConfig())


@pytest.fixture
def manager(admin, ledger):
    return AccessManager(admin, ledger)


def test_accounts_are_deterministic_and_role_separated():
    assert new_account(5).public_key == new_account(5).public_key
    assert new_account(5).public_key != new_account(6).public_key
    assert new_account(5, role="admin").public_key != new_account(5, role="device").public_key


def test_transaction_encoding_roundtrip_and_signature():
    acct = new_account(1)
    tx = build_offload_tx(acct, "md-1", PAYLOAD)
    assert Transaction.decode(tx.encode()) == tx
    assert tx.verify_signature()
    assert get_sender_public_key(tx.encode()) == acct.public_key
    assert build_offload_tx(acct, "md-1", PAYLOAD).nonce == tx.nonce + 1


def test_truncated_transaction_reports_offset():
    raw = build_offload_tx(new_account(1), "md-1", PAYLOAD).encode()
    with pytest.raises(DecodeError) as exc:
        Transaction.decode(raw[:-3])
    assert exc.value.offset is not None
    with pytest.raises(DecodeError):
        Transaction.decode(raw + b"\x00")


def test_empty_device_id_is_rejected():
    with pytest.raises(DomainError):
        build_offload_tx(new_account(1), "", PAYLOAD)


def test_access_result_fields_must_agree():
    with pytest.raises(ValidationError):
        AccessResult(verdict=AccessVerdict.DENIED, message="Successful!", penalty_issued=True)
    with pytest.raises(ValidationError):
        AccessResult(verdict=AccessVerdict.GRANTED, message="Successful!", penalty_issued=True)


# --- 合约 ---
def test_add_md_is_admin_only_and_idempotent(admin):
    device = new_account(2)
    table = PolicyTable(admin_pk=admin.public_key)
    tx = build_registration_tx(admin, device.public_key, "md-2")
    table = contract_add_md(tx, device.public_key, "md-2", table)
    assert policy_list(table, device.public_key) == frozenset({"md-2"})
    assert contract_add_md(tx, device.public_key, "md-2", table) == table

    intruder = new_account(9, role="admin")
    forged = build_registration_tx(intruder, device.public_key, "md-3")
    with pytest.raises(AuthorizationError):
        contract_add_md(forged, device.public_key, "md-3", table)


def test_add_md_rejects_mismatched_pair(admin):
    device = new_account(2)
    table = PolicyTable(admin_pk=admin.public_key)
    tx = build_registration_tx(admin, device.public_key, "md-2")
    with pytest.raises(AuthorizationError):
        contract_add_md(tx, device.public_key, "md-7", table)


def test_delete_md_removes_every_device_and_tolerates_unknown_keys(admin):
    device = new_account(2)
    table = PolicyTable(admin_pk=admin.public_key)
    for device_id in ("md-2", "md-3"):
        table = contract_add_md(
            build_registration_tx(admin, device.public_key, device_id), device.public_key, device_id, table
        )
    assert policy_list(table, device.public_key) == frozenset({"md-2", "md-3"})
    table = contract_delete_md(build_deregistration_tx(admin, device.public_key), device.public_key, table)
    assert policy_list(table, device.public_key) == frozenset()

    stranger = new_account(3)
    unchanged = contract_delete_md(build_deregistration_tx(admin, stranger.public_key), stranger.public_key, table)
    assert unchanged == table


def test_verify_request_outcomes(admin, manager):
    device = new_account(2)
    manager.register(device.public_key, "md-2")

    granted = verify_request(build_offload_tx(device, "md-2", PAYLOAD), manager.table)
    assert granted.granted and granted.message == "Successful!" and not granted.penalty_issued

    wrong_device = verify_request(build_offload_tx(device, "md-5", PAYLOAD), manager.table)
    assert wrong_device.verdict is AccessVerdict.DENIED and wrong_device.message == "Failed"

    outsider = verify_request(build_offload_tx(new_account(4), "md-2", PAYLOAD), manager.table)
    assert not outsider.granted and outsider.penalty_issued

    tampered = build_offload_tx(device, "md-2", PAYLOAD).model_copy(update={"payload_digest": digest(b"x")})
    assert not verify_request(tampered.encode(), manager.table).granted


def test_denied_request_issues_penalty_and_drops_request(manager, ledger):
    device = new_account(2)
    result = manager.handle_request(build_offload_tx(device, "md-2", PAYLOAD))
    assert not result.granted
    block = ledger.mine()
    assert block is not None
    assert [tx.kind for tx in block.transactions] == [TxKind.PENALTY_NOTICE]
    assert block.transactions[0].subject_pk == device.public_key
    assert penalty_counts(ledger) == {device.public_key: 1}


def test_granted_request_is_committed(manager, ledger):
    device = new_account(2)
    manager.register(device.public_key, "md-2")
    manager.handle_request(build_offload_tx(device, "md-2", PAYLOAD))
    ledger.mine()
    counts = ledger.count_kinds()
    assert counts[TxKind.REGISTRATION] == 1
    assert counts[TxKind.OFFLOAD_REQUEST] == 1
    assert counts[TxKind.PENALTY_NOTICE] == 0


# --- 账本 ---
def test_mining_rotates_miners_and_skips_empty_pool(manager, ledger):
    assert ledger.mine() is None
    for n in range(3):
        manager.register(new_account(n).public_key, f"md-{n}")
        ledger.mine()
    assert [b.miner_id for b in ledger.blocks[1:]] == ["miner-0", "miner-1", "miner-2"]
    assert [b.height for b in ledger.blocks] == [0, 1, 2, 3]
    assert verify_chain(ledger)


def test_stale_nonce_is_rejected(ledger):
    device = new_account(2)
    tx = build_offload_tx(device, "md-2", PAYLOAD)
    ledger.submit(tx)
    ledger.submit(tx)
    block = ledger.mine()
    assert block is not None and len(block.transactions) == 1
    ledger.submit(tx)
    assert ledger.mine() is None


def test_pool_is_first_come_first_served(ledger):
    txs = [build_offload_tx(new_account(n), f"md-{n}", PAYLOAD) for n in range(4)]
    pool = TransactionPool()
    for tx in txs:
        pool.push(tx)
    block = mine_block(pool, ledger)
    assert block is not None
    assert list(block.transactions) == txs


def test_tampering_breaks_verification(manager, ledger):
    manager.register(new_account(1).public_key, "md-1")
    ledger.mine()
    manager.register(new_account(2).public_key, "md-2")
    ledger.mine()
    assert verify_chain(ledger)

    ledger.blocks[1] = ledger.blocks[1].model_copy(update={"timestamp": 99})
    assert not verify_chain(ledger)


def test_tampered_transaction_breaks_verification(manager, ledger):
    manager.register(new_account(1).public_key, "md-1")
    ledger.mine()
    block = ledger.blocks[1]
    forged = block.transactions[0].model_copy(update={"device_id": "md-9"})
    ledger.blocks[1] = block.model_copy(update={"transactions": (forged,)})
    assert not verify_chain(ledger)


# --- 持久化 ---
def test_ledger_file_roundtrip_and_append(tmp_path, admin, manager, ledger):
    path = tmp_path / "ledger.bin"
    manager.register(new_account(1).public_key, "md-1")
    ledger.mine()
    save_ledger(ledger, path)
    assert path.read_bytes().startswith(MAGIC)

    loaded = load_ledger(path)
    assert loaded.blocks == ledger.blocks
    assert loaded.miners == ledger.miners
    assert verify_chain(loaded)
    assert rebuild_policy_table(loaded, admin.public_key) == manager.table

    loaded.attach_sealers(ChainConfig())
    reloaded_manager = AccessManager(new_account(0, role="admin"), loaded, manager.table)
    reloaded_manager.register(new_account(2).public_key, "md-2")
    block = loaded.mine()
    append_blocks(path, [block])

    again = load_ledger(path)
    assert again.height == 2
    assert verify_chain(again)


def test_corrupt_ledger_files_are_rejected(tmp_path, ledger):
    path = tmp_path / "ledger.bin"
    save_ledger(ledger, path)
    data = path.read_bytes()

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"NOTALDGR" + data[len(MAGIC) :])
    with pytest.raises(DecodeError) as exc:
        load_ledger(bad_magic)
    assert exc.value.offset == 0

    truncated = tmp_path / "truncated.bin"
    truncated.write_bytes(data[:-5])
    with pytest.raises(DecodeError):
        load_ledger(truncated)


def test_attach_sealers_rejects_other_miner_set(tmp_path, ledger):
    path = tmp_path / "ledger.bin"
    save_ledger(ledger, path)
    loaded = load_ledger(path)
    with pytest.raises(DecodeError):
        loaded.attach_sealers(ChainConfig(n_miners=4))


# --- 授权可靠性与篡改检测 ---
_ADMIN = new_account(0, role="admin")
_DEVICES = [new_account(k, role="device") for k in (1, 2, 3)]
_IDS = ("md-0", "md-1", "md-2")
_OPS = st.lists(
    st.tuples(
        st.sampled_from(["add", "delete", "verify", "tampered", "forged_add"]),
        st.integers(0, len(_DEVICES) - 1),
        st.integers(0, len(_IDS) - 1),
    ),
    max_size=25,
)


@settings(max_examples=60, deadline=None)
@given(ops=_OPS)
def test_grants_follow_the_registered_pairs_exactly(ops):
    table = PolicyTable(admin_pk=_ADMIN.public_key)
    intruder = new_account(9, role="admin")
    registered: set[tuple[bytes, str]] = set()

    for op, who, which in ops:
        pk, device_id = _DEVICES[who].public_key, _IDS[which]
        match op:
            case "add":
                table = contract_add_md(build_registration_tx(_ADMIN, pk, device_id), pk, device_id, table)
                registered.add((pk, device_id))
            case "delete":
                table = contract_delete_md(build_deregistration_tx(_ADMIN, pk), pk, table)
                registered = {pair for pair in registered if pair[0] != pk}
            case "forged_add":
                with pytest.raises(AuthorizationError):
                    contract_add_md(build_registration_tx(intruder, pk, device_id), pk, device_id, table)
            case "verify":
                result = verify_request(build_offload_tx(_DEVICES[who], device_id, PAYLOAD), table)
                assert result.granted == ((pk, device_id) in registered)
            case "tampered":
                # 签名后改写 device_id，签名失效
                signed = build_offload_tx(_DEVICES[who], _IDS[(which + 1) % len(_IDS)], PAYLOAD)
                forged = signed.model_copy(update={"device_id": device_id})
                assert not verify_request(forged, table).granted

        for dev in _DEVICES:
            assert policy_list(table, dev.public_key) == frozenset(
                d for p, d in registered if p == dev.public_key
            )


def _flip(raw: bytes, bit: int) -> bytes:
    mutated = bytearray(raw)
    mutated[bit // 8] ^= 1 << (bit % 8)
    return bytes(mutated)


def test_any_single_bit_flip_in_a_committed_block_is_detected(manager, ledger):
    for k, dev in enumerate(_DEVICES):
        manager.register(dev.public_key, _IDS[k])
        manager.handle_request(build_offload_tx(new_account(k + 1), _IDS[k], PAYLOAD))
        ledger.mine()
    assert verify_chain(ledger)

    rng = np.random.default_rng(0)
    original = list(ledger.blocks)
    for index, block in enumerate(original):
        raw = block.encode()
        for bit in rng.choice(len(raw) * 8, size=min(len(raw) * 8, 120), replace=False):
            try:
                mutated = Block.decode(_flip(raw, int(bit)))
            except (DecodeError, ValidationError):
                continue
            assert mutated != block
            ledger.blocks[index] = mutated
            assert not verify_chain(ledger), f"block {index} bit {bit}"
            ledger.blocks[index] = block
    assert verify_chain(ledger)


def test_any_single_bit_flip_in_a_committed_transaction_is_detected(manager, ledger):
    manager.register(_DEVICES[0].public_key, "md-0")
    ledger.mine()
    block = ledger.blocks[1]
    raw = block.transactions[0].encode()

    for bit in range(len(raw) * 8):
        try:
            forged = Transaction.decode(_flip(raw, bit))
        except (DecodeError, ValidationError):
            continue
        ledger.blocks[1] = block.model_copy(update={"transactions": (forged,)})
        assert not verify_chain(ledger), f"bit {bit}"
    ledger.blocks[1] = block
    assert verify_chain(ledger)
