from bridgeflow.air import parse_program
from bridgeflow.strings import TOP, fold_strings


def _method(body, local="k"):
    text = f"class K {{\n  method m() : String {{\n{body}    return {local};\n  }}\n}}\n"
    p = parse_program(text)
    return p.classes["K"].methods[0]


def _value_before_return(body, local):
    m = _method(body, local)
    cm = fold_strings(m)
    return cm.get(len(m.body) - 1, local), cm


def test_builder_login_pwd():
    body = ('    a = "login";\n    b = new StringBuilder;\n    kcall StringBuilder.<init>/1(b);\n'
            '    vcall StringBuilder.append/2(b, a);\n    c = "Pwd";\n'
            '    vcall StringBuilder.append/2(b, c);\n    k = vcall StringBuilder.toString/1(b);\n')
    assert _value_before_return(body, "k")[0] == "loginPwd"


def test_fluent_builder_chain():
    body = ('    a = "login";\n    b = new StringBuilder;\n    kcall StringBuilder.<init>/1(b);\n'
            '    b2 = vcall StringBuilder.append/2(b, a);\n    c = "Pwd";\n'
            '    b3 = vcall StringBuilder.append/2(b2, c);\n    k = vcall StringBuilder.toString/1(b3);\n')
    assert _value_before_return(body, "k")[0] == "loginPwd"


def test_merge_of_unequal_is_top():
    body = '    k = "x";\n    ifnd L;\n    k = "y";\n  L:\n'
    v, cm = _value_before_return(body, "k")
    assert v is None
    assert cm.values[(len(_method(body).body) - 1, "k")] is TOP
    assert (len(_method(body).body) - 1, "k") not in cm.resolved()


def test_merge_of_equal_stays():
    body = '    k = "x";\n    ifnd L;\n    k = "x";\n  L:\n'
    assert _value_before_return(body, "k")[0] == "x"


def test_self_assign():
    assert _value_before_return('    k = "x";\n    k = k;\n', "k")[0] == "x"


def test_concat_and_valueof():
    body = ('    a = "ab";\n    b = "cd";\n    c = vcall String.concat/2(a, b);\n'
            '    n = 7;\n    d = scall String.valueOf/1(n);\n')
    assert _value_before_return(body, "c")[0] == "abcd"
    assert _value_before_return(body, "d")[0] == "7"


def test_unknown_call_result_is_top():
    body = '    o = new Object;\n    s = vcall Object.toString/1(o);\n'
    assert _value_before_return(body, "s")[0] is None
