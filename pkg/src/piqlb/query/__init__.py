from .ast import (AggType, And, ColumnEncoding, Condition, Or, PrivateQuery,
                  Query, Range, SecretSpec, Single, condition_columns,
                  condition_leaves, private_query_from_bytes,
                  private_query_to_bytes, private_query_to_obj)
from .derive import derive_private_query
from .encode import (ColumnSpec, Schema, concat_encodings,
                     encode_condition_value, load_schema, save_schema,
                     schema_from_obj, schema_to_obj)
from .parse import (QueryLimits, condition_to_text, format_timestamp,
                    parse_datetime, parse_query, query_to_text)

__all__ = [
    "AggType", "And", "ColumnEncoding", "ColumnSpec", "Condition", "Or",
    "PrivateQuery", "Query", "QueryLimits", "Range", "Schema", "SecretSpec",
    "Single", "concat_encodings", "condition_columns", "condition_leaves",
    "condition_to_text", "derive_private_query", "encode_condition_value",
    "format_timestamp", "load_schema", "parse_datetime", "parse_query",
    "private_query_from_bytes", "private_query_to_bytes",
    "private_query_to_obj", "query_to_text", "save_schema",
    "schema_from_obj", "schema_to_obj",
]
