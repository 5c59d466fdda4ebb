"""
Server and client
=================

Starts a server in a background thread and drives it with the Python
client: register, log in, upload PE files and workflows, search, run.
Run from this directory so ``resources/`` is found.
"""

import os
from pathlib import Path

from laminar.client import LaminarClient
from laminar.server import App, serve_in_thread

os.chdir(Path(__file__).parent)
server, _ = serve_in_thread(App())
host, port = server.server_address[:2]
client = LaminarClient(f"{host}:{port}")

client.register("zz46", "password")
client.login("zz46", "password")

# %%
# PE files carry a ``#@`` header, so the client can describe them without
# importing them. Imports are scanned from the source.

pe = client.register_PE("pes/NumberProducer.py", "Random numbers producer")
print(pe["peId"], pe["peName"], pe["peImports"])

wf = client.register_Workflow("workflows/isPrime.json")
print(wf["workflowId"], wf["entryPoint"], wf["peIds"])
client.register_Workflow("workflows/astrophysics.json")

# %%

for hit in client.search_Registry("prime", "workflow"):
    print(hit)

# %%
# Run the registered workflow by name, sequentially and on five processes.

result = client.run("isPrime", input=5, args={"seed": 36})
print(result.status, result.stdout)
result = client.run("isPrime", input=5, process="MULTI", args={"seed": 36, "num": 5})
print(result.status, sorted(result.outputs["PrintPrime"]))

# %%
# The astrophysics pipeline reads ``resources/coordinates.txt``; the client
# ships the directory with the request and the server unpacks it into the
# run's working directory.

result = client.run("Astrophysics", input=5, resources=True)
print("\n".join(result.stdout))

server.shutdown()
