"""Protocol-aware ICS security assessment toolkit.

Subpackages:
    modbus      Modbus TCP frame codec and client operations
    simulators  bundled Modbus device testbed and water-plant profile
    opcua       minimal OPC UA binary client, server, and production-line model
    netscan     concurrent TCP connect scanner with protocol classification
    evidence    append-only evidence inbox, fact extraction, mitigation
                mapping, and assessment report generation
    service     HTTP API tying the tool modules together
    cli         command-line driver
"""

__version__ = "0.1.0"
