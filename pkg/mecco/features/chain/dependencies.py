"""合约调用的权限依赖：只有管理员签名的交易才能修改策略表"""
from ...core.errors import AuthorizationError
from .models import PolicyTable, Transaction, TxKind


def require_admin(kind: TxKind):
    """管理员签名校验依赖"""

    def _checker(tx: Transaction, table: PolicyTable) -> Transaction:
        if tx.sender_pk != table.admin_pk:
            raise AuthorizationError("only the contract admin may call this function")
        if not tx.verify_signature():
            raise AuthorizationError("admin signature does not verify")
        if tx.kind is not kind:
            raise AuthorizationError(f"expected a {kind.value} transaction, got {tx.kind.value}")
        return tx

    return _checker
