#!/usr/bin/env python3
"""Walkthrough: OPC UA assessment of the bundled production-line server.

Covers the five client modes in sequence: endpoint discovery, session
establishment, namespace browse, variable enumeration, and read/write.
"""

from icskit.opcua import (
    AccessDenied,
    NodeId,
    VariantValue,
    browse_nodes,
    build_production_line_model,
    close_session,
    enumerate_variables,
    establish_session,
    get_endpoints,
    read_node,
    serve_opcua,
    write_node,
)


def show_tree(node, indent=0):
    print("  " * indent + f"{node.browse_name} ({node.node_id})")
    for child in node.children:
        show_tree(child, indent + 1)


def main() -> None:
    server = serve_opcua(("127.0.0.1", 0), build_production_line_model(seed=7))
    url = f"opc.tcp://127.0.0.1:{server.port}/server/"
    print(f"server at {url}\n")

    print("== 1. endpoints ==")
    for ep in get_endpoints(url):
        print(f"  policy={ep.security_policy} mode={ep.security_mode} "
              f"tokens={sorted(ep.token_types)}")

    print("\n== 2. anonymous session ==")
    session = establish_session(url)
    print(f"  identity: {session.identity}")

    print("\n== 3. browse (depth 3) ==")
    tree = browse_nodes(session, depth=3)
    show_tree(tree.root)

    print("\n== 4. enumerate namespace 2 ==")
    for profile in enumerate_variables(session, 2):
        access = ("r" if profile.access.readable else "") + \
            ("w" if profile.access.writable else "")
        print(f"  {str(profile.node_id):11s} {profile.display_name:13s} "
              f"{profile.data_type.name:8s} [{access}] = {profile.current_value.value}")

    print("\n== 5. process control ==")
    speed = NodeId(2, 20)
    print(f"  motor speed before: {read_node(session, speed).value}")
    write_node(session, speed, VariantValue.int32(1200))
    print(f"  motor speed after write 1200: {read_node(session, speed).value}")
    try:
        write_node(session, NodeId(2, 30), VariantValue.double(0.0))
    except AccessDenied:
        print("  write to Uptime denied (read-only system metric)")

    close_session(session)
    server.stop()
    print("\ndone.")


if __name__ == "__main__":
    main()
